// SPDX-License-Identifier: Apache-2.0

#include "parahom/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "parahom/errors.hpp"

namespace parahom::detail {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct TwiddleTable {
  // twiddle[s][j] = exp(-2*pi*i * j / 2^(s+1)), j < 2^s, for stage size 2^(s+1)
  std::vector<std::vector<std::complex<double>>> stage;
};

const TwiddleTable& twiddles_for(std::size_t n) {
  static std::map<std::size_t, TwiddleTable> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  TwiddleTable table;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    std::vector<std::complex<double>> row(len / 2);
    for (std::size_t j = 0; j < len / 2; ++j) {
      const double ang = -kTwoPi * static_cast<double>(j) / static_cast<double>(len);
      row[j] = {std::cos(ang), std::sin(ang)};
    }
    table.stage.push_back(std::move(row));
  }
  return cache.emplace(n, std::move(table)).first->second;
}

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

} // namespace

void fft_pow2(std::complex<double>* a, std::size_t n, bool inverse) {
  if (n == 1) return;
  if (!is_pow2(n)) throw InvalidArgument("fft_pow2: length must be a power of two");

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const TwiddleTable& table = twiddles_for(n);
  std::size_t s = 0;
  for (std::size_t len = 2; len <= n; len <<= 1, ++s) {
    const auto& w = table.stage[s];
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> tw = inverse ? std::conj(w[j]) : w[j];
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * tw;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) a[i] *= scale;
  }
}

void fft_lines(std::complex<double>* data, std::size_t n, std::size_t stride,
               const std::vector<std::size_t>& offsets, bool inverse) {
  std::vector<std::complex<double>> line(n);
  for (std::size_t off : offsets) {
    for (std::size_t j = 0; j < n; ++j) line[j] = data[off + j * stride];
    fft_pow2(line.data(), n, inverse);
    for (std::size_t j = 0; j < n; ++j) data[off + j * stride] = line[j];
  }
}

} // namespace parahom::detail
