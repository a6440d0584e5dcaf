#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ojasde/matrix.hpp"

namespace ojasde {

/// Central finite differences of a matrix-to-array map.
///
/// Returns one array of partials per matrix entry (r,s), in row-major entry
/// order: out[r*cols+s][q] = d f_q / d w_rs. The step for entry (r,s) is
/// h_base * max(1, |w_rs|), balancing truncation against roundoff.
inline std::vector<std::vector<double>> fd_derivative(
    const std::function<std::vector<double>(const Matrix&)>& f, const Matrix& w,
    double h_base = 1e-5) {
  if (!(h_base > 0.0)) throw Error("fd_derivative: step must be positive");
  std::vector<std::vector<double>> out(w.size());
  Matrix wp = w;
  for (std::size_t rs = 0; rs < w.size(); ++rs) {
    const double h = h_base * std::max(1.0, std::abs(w[rs]));
    wp[rs] = w[rs] + h;
    std::vector<double> fp = f(wp);
    wp[rs] = w[rs] - h;
    std::vector<double> fm = f(wp);
    wp[rs] = w[rs];
    if (fp.size() != fm.size())
      throw NonFiniteEvaluation("fd_derivative: inconsistent output size");
    std::vector<double> d(fp.size());
    for (std::size_t q = 0; q < fp.size(); ++q) {
      d[q] = (fp[q] - fm[q]) / (2.0 * h);
      if (!std::isfinite(d[q]))
        throw NonFiniteEvaluation("fd_derivative: non-finite evaluation");
    }
    out[rs] = std::move(d);
  }
  return out;
}

}  // namespace ojasde
