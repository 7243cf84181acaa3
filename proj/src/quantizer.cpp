#include "disem/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace disem {

Quantizer::Quantizer(double delta) : delta_(delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("quantizer.delta must be positive");
  const double levels = 2.0 / delta;
  const double rounded = std::round(levels);
  if (rounded < 1.0 || std::abs(levels - rounded) > 1e-9 * rounded)
    throw std::invalid_argument("quantizer.delta must divide 2 evenly, got " +
                                std::to_string(delta));
  k_max_ = static_cast<int>(rounded);
}

void Quantizer::check_range(double x) const {
  if (!(x >= -1.0 && x <= 1.0))
    throw std::out_of_range("message value outside [-1, 1]: " + std::to_string(x));
}

int Quantizer::bin_index(double x) const {
  check_range(x);
  int k = static_cast<int>(std::lround((x + 1.0) / delta_));
  k = std::clamp(k, 0, k_max_);
  // Settle ties with the half-open rule instead of the rounding mode.
  while (k > 0 && x < lower_edge(k)) --k;
  while (k < k_max_ && x >= upper_edge(k)) ++k;
  return k;
}

bool Quantizer::on_grid(double x) const {
  check_range(x);
  const int k = std::clamp(static_cast<int>(std::lround((x + 1.0) / delta_)), 0, k_max_);
  return x == grid_point(k);
}

int Quantizer::cell_index(double x) const {
  check_range(x);
  if (on_grid(x)) return -1;
  int u = std::clamp(static_cast<int>(std::floor((x + 1.0) / delta_)), 0, k_max_ - 1);
  while (u > 0 && x < grid_point(u)) --u;
  while (u < k_max_ - 1 && x > grid_point(u + 1)) ++u;
  return u;
}

int Quantizer::sign_weight(double x, int k) const {
  check_range(x);
  if (k < 0 || k > k_max_)
    throw std::out_of_range("bin index outside {0..K}: " + std::to_string(k));
  const double g = grid_point(k);
  if (x == g) return 0;
  if (x > grid_point(k - 1) && x < g) return 1;
  if (x > g && x < grid_point(k + 1)) return -1;
  return 0;
}

}  // namespace disem
