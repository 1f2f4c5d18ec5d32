#pragma once

#include <cstddef>

// Elementwise f(z) and f'(z) over contiguous buffers. Built in their own
// translation unit with vector math enabled; see src/CMakeLists.txt.
namespace sbnet::kernels {

void silu(std::size_t n, const double* __restrict z, double* __restrict out,
          double* __restrict slope) noexcept;
void gelu(std::size_t n, const double* __restrict z, double* __restrict out,
          double* __restrict slope) noexcept;

}  // namespace sbnet::kernels
