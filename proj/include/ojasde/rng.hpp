#pragma once

#include <cmath>
#include <cstdint>

#include "ojasde/eig.hpp"
#include "ojasde/matrix.hpp"

namespace ojasde {

/// Counter-based random stream in the splitmix64 family.
///
/// A stream is addressed by (seed, stream index); draw k of stream i is a
/// pure function of (seed, i, k), so parallel ensembles are reproducible
/// regardless of how paths are scheduled onto workers.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) {
    key_ = mix(mix(seed + GOLDEN) ^ mix(stream + FLEA));
  }

  std::uint64_t next_u64() { return mix(key_ + (++ctr_) * GOLDEN); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1]; safe as a log() argument.
  double uniform01_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; draws come in cached pairs.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01_open();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Matrix normal_matrix(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = normal();
    return m;
  }

 private:
  static constexpr std::uint64_t GOLDEN = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t FLEA = 0xBF58476D1CE4E5B9ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Haar-distributed orthogonal matrix: QR of an i.i.d. standard-normal matrix
/// with the R-diagonal sign fix, which makes the factorization unique and the
/// draw unbiased. Householder QR keeps the defect at machine precision.
inline Matrix haar_orthogonal(std::size_t n, RngStream& rng) {
  Matrix a = rng.normal_matrix(n, n);
  Matrix q = Matrix::identity(n);

  // Householder reduction of a to upper triangular, accumulating Q.
  for (std::size_t k = 0; k < n; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += a(i, k) * a(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = a(k, k) >= 0.0 ? -norm : norm;
    std::vector<double> v(n, 0.0);
    v[k] = a(k, k) - alpha;
    for (std::size_t i = k + 1; i < n; ++i) v[i] = a(i, k);
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;

    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < n; ++i) s += v[i] * a(i, j);
      s *= 2.0 / vnorm2;
      for (std::size_t i = k; i < n; ++i) a(i, j) -= s * v[i];
    }
    // q accumulates the product of reflectors: q <- q * H_k.
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k; j < n; ++j) s += q(i, j) * v[j];
      s *= 2.0 / vnorm2;
      for (std::size_t j = k; j < n; ++j) q(i, j) -= s * v[j];
    }
  }

  // Sign fix: make diag(R) positive so Q is the unique Haar factor.
  for (std::size_t j = 0; j < n; ++j) {
    if (a(j, j) < 0.0)
      for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
  }
  return q;
}

}  // namespace ojasde
