#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "disem/quantizer.hpp"

namespace disem {

inline constexpr double kDefaultEpsilon = 1e-10;

/// N messages of L digits each, row-major, every entry in [-1, 1].
class MessageBatch {
 public:
  MessageBatch(std::size_t num_messages, std::size_t length);
  MessageBatch(std::size_t num_messages, std::size_t length, std::vector<double> values);

  std::size_t size() const { return n_; }
  std::size_t length() const { return len_; }

  double at(std::size_t i, std::size_t digit) const { return values_[i * len_ + digit]; }
  void set(std::size_t i, std::size_t digit, double v);

  std::span<const double> message(std::size_t i) const {
    return {values_.data() + i * len_, len_};
  }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t n_;
  std::size_t len_;
  std::vector<double> values_;
};

/// Per-bin counts N_k of one digit across a batch; epsilon smooths empty bins.
struct DigitHistogram {
  std::vector<std::int64_t> counts;
  double epsilon = kDefaultEpsilon;

  std::int64_t total() const;
  double smoothed(int k) const { return static_cast<double>(counts[k]) + epsilon; }
};

DigitHistogram histogram(const MessageBatch& batch, std::size_t digit, const Quantizer& q,
                         double epsilon = kDefaultEpsilon);

/// Entropy in bits of one digit given its histogram over n messages.
double digit_entropy(const DigitHistogram& hist, std::size_t n);

/// Sum of per-digit entropies of the quantized batch, in bits.
double entropy(const MessageBatch& batch, const Quantizer& q, double epsilon = kDefaultEpsilon);

/// Per-digit pseudo gradients, same shape as the batch they came from.
struct PseudoGradient {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> grads;

  double at(std::size_t i, std::size_t digit) const { return grads[i * cols + digit]; }
};

/// Pseudo gradient of one value against a frozen histogram of n messages:
/// -(1/n) log2((N_{u+1} + eps) / (N_u + eps)) for x in (g_u, g_{u+1}), zero on
/// grid points.
double pseudo_gradient_at(double x, const DigitHistogram& hist, std::size_t n, const Quantizer& q);

PseudoGradient pseudo_gradient(const MessageBatch& batch, const Quantizer& q,
                               double epsilon = kDefaultEpsilon);

/// Largest possible |pseudo gradient| for a batch of n messages.
double pseudo_gradient_bound(std::size_t n, double epsilon = kDefaultEpsilon);

/// Moves every digit simultaneously by -eta * grad against the batch's own
/// histograms, clamping to [-1, 1].
MessageBatch pseudo_step(const MessageBatch& batch, double eta, const Quantizer& q,
                         double epsilon = kDefaultEpsilon);

/// Updates a single digit of a single message; all other values stay fixed.
/// Returns the new value.
double pseudo_step_single(MessageBatch& batch, std::size_t i, std::size_t digit, double eta,
                          const Quantizer& q, double epsilon = kDefaultEpsilon);

/// H(M') - H(M) in bits when one count moves from the less popular of two
/// adjacent bins to the more popular one. Requires nu != nu1, both >= 1 and
/// n >= nu + nu1.
double lemma3_delta(std::int64_t nu, std::int64_t nu1, std::int64_t n);

}  // namespace disem
