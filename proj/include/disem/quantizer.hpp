#pragma once

#include <cstddef>

namespace disem {

/// Uniform quantizer over the message range [-1, 1].
///
/// Grid points are g_k = k * delta - 1 for k in {0..K}, K = 2 / delta. Bin k
/// owns the half-open interval [(k - 0.5) delta - 1, (k + 0.5) delta - 1), so
/// the K + 1 bins tile [-1, 1] with x = 1 landing in bin K.
class Quantizer {
 public:
  explicit Quantizer(double delta = 0.25);

  double delta() const { return delta_; }
  int levels() const { return k_max_; }  // K
  int num_bins() const { return k_max_ + 1; }

  double grid_point(int k) const { return k * delta_ - 1.0; }
  double lower_edge(int k) const { return (k - 0.5) * delta_ - 1.0; }
  double upper_edge(int k) const { return (k + 0.5) * delta_ - 1.0; }

  /// Index of the bin containing x. Throws std::out_of_range outside [-1, 1].
  int bin_index(double x) const;

  /// Grid value of the bin containing x.
  double quantize(double x) const { return grid_point(bin_index(x)); }

  /// True when x coincides with a grid point.
  bool on_grid(double x) const;

  /// Pseudo-derivative weight of bin k at x: +1 on (g_{k-1}, g_k), -1 on
  /// (g_k, g_{k+1}), 0 elsewhere (including x == g_k).
  int sign_weight(double x, int k) const;

  /// Lower grid index u of the open cell (g_u, g_{u+1}) containing x, or -1
  /// when x is a grid point.
  int cell_index(double x) const;

 private:
  void check_range(double x) const;

  double delta_;
  int k_max_;
};

}  // namespace disem
