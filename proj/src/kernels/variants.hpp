// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "itertl/kernels.hpp"

namespace itertl::kernels::detail {

// Defined in the per-ISA translation units. Each returns nullptr when the
// variant was not compiled for this target.
const KernelTable* avx2_variant();
const KernelTable* neon_variant();

}  // namespace itertl::kernels::detail
