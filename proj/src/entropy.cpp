#include "disem/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace disem {

namespace {

void check_value(double v) {
  if (!(v >= -1.0 && v <= 1.0))
    throw std::out_of_range("message value outside [-1, 1]: " + std::to_string(v));
}

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace

MessageBatch::MessageBatch(std::size_t num_messages, std::size_t length)
    : MessageBatch(num_messages, length, std::vector<double>(num_messages * length, 0.0)) {}

MessageBatch::MessageBatch(std::size_t num_messages, std::size_t length, std::vector<double> values)
    : n_(num_messages), len_(length), values_(std::move(values)) {
  if (n_ == 0 || len_ == 0) throw std::invalid_argument("message batch needs N >= 1 and L >= 1");
  if (values_.size() != n_ * len_)
    throw std::invalid_argument("message batch values do not match N x L");
  std::for_each(values_.begin(), values_.end(), check_value);
}

void MessageBatch::set(std::size_t i, std::size_t digit, double v) {
  check_value(v);
  values_.at(i * len_ + digit) = v;
}

std::int64_t DigitHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

DigitHistogram histogram(const MessageBatch& batch, std::size_t digit, const Quantizer& q,
                         double epsilon) {
  if (digit >= batch.length())
    throw std::out_of_range("digit " + std::to_string(digit) + " outside message length " +
                            std::to_string(batch.length()));
  DigitHistogram h{std::vector<std::int64_t>(q.num_bins(), 0), epsilon};
  for (std::size_t i = 0; i < batch.size(); ++i) ++h.counts[q.bin_index(batch.at(i, digit))];
  return h;
}

double digit_entropy(const DigitHistogram& hist, std::size_t n) {
  const double total = static_cast<double>(n);
  double h = 0.0;
  for (std::size_t k = 0; k < hist.counts.size(); ++k)
    h -= plogp(hist.smoothed(static_cast<int>(k)) / total);
  return h;
}

double entropy(const MessageBatch& batch, const Quantizer& q, double epsilon) {
  double h = 0.0;
  for (std::size_t d = 0; d < batch.length(); ++d)
    h += digit_entropy(histogram(batch, d, q, epsilon), batch.size());
  return h;
}

double pseudo_gradient_at(double x, const DigitHistogram& hist, std::size_t n, const Quantizer& q) {
  const int u = q.cell_index(x);
  if (u < 0) return 0.0;
  return -std::log2(hist.smoothed(u + 1) / hist.smoothed(u)) / static_cast<double>(n);
}

PseudoGradient pseudo_gradient(const MessageBatch& batch, const Quantizer& q, double epsilon) {
  PseudoGradient g{batch.size(), batch.length(),
                   std::vector<double>(batch.size() * batch.length(), 0.0)};
  for (std::size_t d = 0; d < batch.length(); ++d) {
    const DigitHistogram hist = histogram(batch, d, q, epsilon);
    for (std::size_t i = 0; i < batch.size(); ++i)
      g.grads[i * g.cols + d] = pseudo_gradient_at(batch.at(i, d), hist, batch.size(), q);
  }
  return g;
}

double pseudo_gradient_bound(std::size_t n, double epsilon) {
  const double total = static_cast<double>(n);
  return std::log2((total + epsilon) / epsilon) / total;
}

MessageBatch pseudo_step(const MessageBatch& batch, double eta, const Quantizer& q, double epsilon) {
  if (!(eta > 0.0)) throw std::invalid_argument("pseudo step size must be positive");
  const PseudoGradient g = pseudo_gradient(batch, q, epsilon);
  std::vector<double> next(batch.values().begin(), batch.values().end());
  for (std::size_t j = 0; j < next.size(); ++j)
    next[j] = std::clamp(next[j] - eta * g.grads[j], -1.0, 1.0);
  return MessageBatch(batch.size(), batch.length(), std::move(next));
}

double pseudo_step_single(MessageBatch& batch, std::size_t i, std::size_t digit, double eta,
                          const Quantizer& q, double epsilon) {
  if (!(eta > 0.0)) throw std::invalid_argument("pseudo step size must be positive");
  if (i >= batch.size()) throw std::out_of_range("message index out of range");
  const DigitHistogram hist = histogram(batch, digit, q, epsilon);
  const double x = batch.at(i, digit);
  const double next = std::clamp(x - eta * pseudo_gradient_at(x, hist, batch.size(), q), -1.0, 1.0);
  batch.set(i, digit, next);
  return next;
}

double lemma3_delta(std::int64_t nu, std::int64_t nu1, std::int64_t n) {
  if (nu < 1 || nu1 < 1 || nu == nu1 || n < nu + nu1)
    throw std::invalid_argument("count transfer needs Nu != Nu1, both >= 1 and N >= Nu + Nu1");
  const double total = static_cast<double>(n);
  const auto f = [total](std::int64_t c) { return plogp(static_cast<double>(c) / total); };
  // The less popular bin donates one member to the more popular one.
  const std::int64_t big = std::max(nu, nu1);
  const std::int64_t small = std::min(nu, nu1);
  return f(big) + f(small) - f(big + 1) - f(small - 1);
}

}  // namespace disem
