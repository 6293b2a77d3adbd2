// SPDX-License-Identifier: Apache-2.0

#ifndef PARAHOM_FFT_HPP
#define PARAHOM_FFT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace parahom::detail {

/// In-place radix-2 complex FFT, length must be a power of two.
/// Forward convention: X_k = sum_j x_j e^{-2*pi*i*jk/n}; the inverse divides
/// by n so that inverse(forward(x)) == x.
void fft_pow2(std::complex<double>* data, std::size_t n, bool inverse);

/// Strided batch transform: `count` lines of length n, line l starting at
/// data + offsets[l], elements spaced by `stride`.
void fft_lines(std::complex<double>* data, std::size_t n, std::size_t stride,
               const std::vector<std::size_t>& offsets, bool inverse);

/// Signed wavenumber for mode index k on an n-point grid: k for k < n/2,
/// k - n for k > n/2 and -n/2 at the Nyquist index.
inline long signed_mode(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<long>(k)
                    : static_cast<long>(k) - static_cast<long>(n);
}

} // namespace parahom::detail

#endif
