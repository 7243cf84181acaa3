#include "disem/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace disem::ad {

// ---------------------------------------------------------------------------
// ParameterSet

Tensor& ParameterSet::add(const std::string& name, std::size_t rows, std::size_t cols) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
  index_[name] = entries_.size();
  entries_.emplace_back(name, Tensor(rows, cols));
  return entries_.back().second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second].second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second].second;
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

void ParameterSet::save(std::ostream& out) const {
  out << "disem-params " << kCheckpointVersion << '\n';
  out << "count " << entries_.size() << '\n';
  out << std::hexfloat;
  for (const auto& [name, t] : entries_) {
    out << "tensor " << name << ' ' << t.rows << ' ' << t.cols << '\n';
    for (std::size_t i = 0; i < t.data.size(); ++i) out << (i ? " " : "") << t.data[i];
    out << '\n';
  }
  out << std::defaultfloat;
}

ParameterSet ParameterSet::load(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "disem-params")
    throw std::runtime_error("not a parameter checkpoint");
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  std::string word;
  std::size_t count = 0;
  if (!(in >> word >> count) || word != "count") throw std::runtime_error("malformed checkpoint header");
  ParameterSet ps;
  for (std::size_t e = 0; e < count; ++e) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> word >> name >> rows >> cols) || word != "tensor")
      throw std::runtime_error("malformed tensor header in checkpoint");
    Tensor& t = ps.add(name, rows, cols);
    for (double& v : t.data) {
      // operator>> does not parse hex floats portably; strtod does.
      std::string tok;
      if (!(in >> tok)) throw std::runtime_error("truncated checkpoint tensor " + name);
      char* end = nullptr;
      v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size()) throw std::runtime_error("bad value in checkpoint: " + tok);
    }
  }
  return ps;
}

std::string ParameterSet::serialize() const {
  std::ostringstream os;
  save(os);
  return os.str();
}

void ParameterSet::save_file(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    save(out);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot move checkpoint into place: " + path);
}

ParameterSet ParameterSet::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return load(in);
}

// ---------------------------------------------------------------------------
// Var / Tape

std::size_t Var::rows() const { return tape_->rows_of(id_); }
std::size_t Var::cols() const { return tape_->cols_of(id_); }
std::span<const double> Var::value() const { return tape_->value_of(id_); }

double Var::scalar() const {
  if (size() != 1) throw std::logic_error("scalar() on a non-scalar node");
  return value()[0];
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size())
    throw std::invalid_argument("node is not on this tape");
}

Var Tape::record(std::size_t rows, std::size_t cols, std::vector<double> value, BackwardFn backward) {
  if (backward_done_) throw std::logic_error("tape already reversed; reset() before recording");
  if (value.size() != rows * cols) throw std::logic_error("node value does not match its shape");
  if (check_finite_ && !std::all_of(value.begin(), value.end(), [](double v) { return std::isfinite(v); }))
    throw std::runtime_error("non-finite value recorded on tape at node " + std::to_string(nodes_.size()));
  nodes_.push_back(Node{rows, cols, std::move(value), {}, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return record(rows, cols, std::move(values), nullptr);
}

Var Tape::param(Tensor& t) {
  if (auto it = param_nodes_.find(&t); it != param_nodes_.end()) return Var(this, it->second);
  Var v = record(t.rows, t.cols, t.data, nullptr);
  param_nodes_[&t] = v.id_;
  return v;
}

void Tape::inject_gradient(Var at, std::span<const double> g) {
  check_owned(at);
  if (g.size() != nodes_[at.id_].value.size())
    throw std::invalid_argument("injected gradient shape mismatch");
  if (backward_done_) throw std::logic_error("inject_gradient after backward");
  injections_.emplace_back(at.id_, std::vector<double>(g.begin(), g.end()));
}

void Tape::backward(Var loss) {
  if (backward_done_) throw std::logic_error("backward called twice without reset");
  if (nodes_.empty()) throw std::logic_error("backward on an empty tape");
  check_owned(loss);
  if (nodes_[loss.id_].value.size() != 1) throw std::invalid_argument("loss must be a scalar");
  for (auto& n : nodes_) n.grad.assign(n.value.size(), 0.0);
  nodes_[loss.id_].grad[0] = 1.0;
  for (const auto& [id, g] : injections_)
    for (std::size_t i = 0; i < g.size(); ++i) nodes_[id].grad[i] += g[i];
  for (std::size_t id = loss.id_ + 1; id-- > 0;)
    if (nodes_[id].backward) nodes_[id].backward(*this, id);
  backward_done_ = true;
}

void Tape::accumulate_param_grads() const {
  if (!backward_done_) throw std::logic_error("accumulate_param_grads before backward");
  for (const auto& [tensor, id] : param_nodes_) {
    if (tensor->grad.size() != tensor->data.size()) tensor->grad.assign(tensor->data.size(), 0.0);
    const auto& g = nodes_[id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) tensor->grad[i] += g[i];
  }
}

std::span<const double> Tape::grad(Var v) const {
  check_owned(v);
  if (!backward_done_) throw std::logic_error("gradient requested before backward");
  return nodes_[v.id_].grad;
}

void Tape::reset() {
  nodes_.clear();
  injections_.clear();
  param_nodes_.clear();
  backward_done_ = false;
}

// ---------------------------------------------------------------------------
// Ops

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) throw std::invalid_argument("operands live on different tapes");
  a.tape()->check_owned(a);
  a.tape()->check_owned(b);
  return *a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv_from_output) {
  Tape& t = *a.tape();
  t.check_owned(a);
  std::vector<double> out(a.value().begin(), a.value().end());
  for (double& v : out) v = fwd(v);
  const std::size_t ia = a.id();
  return t.record(a.rows(), a.cols(), std::move(out), [ia, deriv_from_output](Tape& tp, std::size_t self) {
    auto y = tp.value_of(self);
    auto gy = tp.grad_of(self);
    auto ga = tp.grad_of(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * deriv_from_output(y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw std::invalid_argument("matmul: inner dimensions differ");
  auto av = a.value();
  auto bv = b.value();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(m, n, std::move(out), [ia, ib, m, k, n](Tape& tp, std::size_t self) {
    auto gc = tp.grad_of(self);
    auto av = tp.value_of(ia);
    auto bv = tp.value_of(ib);
    auto ga = tp.grad_of(ia);
    auto gb = tp.grad_of(ib);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double g = gc[i * n + j];
        if (g == 0.0) continue;
        for (std::size_t p = 0; p < k; ++p) {
          ga[i * k + p] += g * bv[p * n + j];
          gb[p * n + j] += av[i * k + p] * g;
        }
      }
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "add");
  std::vector<double> out(a.value().begin(), a.value().end());
  auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.rows(), a.cols(), std::move(out), [ia, ib](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto ga = tp.grad_of(ia);
    auto gb = tp.grad_of(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.value().begin(), a.value().end());
  auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.rows(), a.cols(), std::move(out), [ia, ib](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto ga = tp.grad_of(ia);
    auto gb = tp.grad_of(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.value().begin(), a.value().end());
  auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.rows(), a.cols(), std::move(out), [ia, ib](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto av = tp.value_of(ia);
    auto bv = tp.value_of(ib);
    auto ga = tp.grad_of(ia);
    auto gb = tp.grad_of(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * bv[i];
      gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double v) { return v * s; }, [s](double) { return s; });
}

Var scale(Var v, Var s) {
  Tape& t = same_tape(v, s);
  if (s.size() != 1) throw std::invalid_argument("scale: factor must be 1x1");
  const double sv = s.value()[0];
  std::vector<double> out(v.value().begin(), v.value().end());
  for (double& x : out) x *= sv;
  const std::size_t iv = v.id(), is = s.id();
  return t.record(v.rows(), v.cols(), std::move(out), [iv, is](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto vv = tp.value_of(iv);
    const double sv = tp.value_of(is)[0];
    auto gv = tp.grad_of(iv);
    double gs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      gv[i] += g[i] * sv;
      gs += g[i] * vv[i];
    }
    tp.grad_of(is)[0] += gs;
  });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw std::invalid_argument("add_n: no terms");
  Tape& t = *terms[0].tape();
  std::vector<double> out(terms[0].size(), 0.0);
  std::vector<std::size_t> ids;
  for (Var v : terms) {
    same_tape(terms[0], v);
    require_same_shape(terms[0], v, "add_n");
    auto vv = v.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vv[i];
    ids.push_back(v.id());
  }
  return t.record(terms[0].rows(), terms[0].cols(), std::move(out), [ids](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    for (std::size_t id : ids) {
      auto gi = tp.grad_of(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var squash(Var a) {
  return unary(a, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double y) { return y * (1.0 - y); });
}

Var softmax(Var a) {
  Tape& t = *a.tape();
  t.check_owned(a);
  auto av = a.value();
  const double mx = *std::max_element(av.begin(), av.end());
  std::vector<double> out(av.size());
  double z = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) z += (out[i] = std::exp(av[i] - mx));
  for (double& v : out) v /= z;
  const std::size_t ia = a.id();
  return t.record(a.rows(), a.cols(), std::move(out), [ia](Tape& tp, std::size_t self) {
    auto y = tp.value_of(self);
    auto g = tp.grad_of(self);
    auto ga = tp.grad_of(ia);
    double gy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) gy += g[i] * y[i];
    for (std::size_t i = 0; i < y.size(); ++i) ga[i] += y[i] * (g[i] - gy);
  });
}

Var log_softmax(Var a) {
  Tape& t = *a.tape();
  t.check_owned(a);
  auto av = a.value();
  const double mx = *std::max_element(av.begin(), av.end());
  double z = 0.0;
  for (double v : av) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(av.begin(), av.end());
  for (double& v : out) v -= lse;
  const std::size_t ia = a.id();
  return t.record(a.rows(), a.cols(), std::move(out), [ia](Tape& tp, std::size_t self) {
    auto y = tp.value_of(self);
    auto g = tp.grad_of(self);
    auto ga = tp.grad_of(ia);
    double gs = 0.0;
    for (double v : g) gs += v;
    for (std::size_t i = 0; i < y.size(); ++i) ga[i] += g[i] - std::exp(y[i]) * gs;
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  Tape& t = *parts[0].tape();
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<double> out;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    same_tape(parts[0], p);
    if (p.cols() != cols) throw std::invalid_argument("concat: column counts differ");
    rows += p.rows();
    out.insert(out.end(), p.value().begin(), p.value().end());
    ids.push_back(p.id());
  }
  return t.record(rows, cols, std::move(out), [ids](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    std::size_t off = 0;
    for (std::size_t id : ids) {
      auto gi = tp.grad_of(id);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[off + i];
      off += gi.size();
    }
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  t.check_owned(a);
  double s = 0.0;
  for (double v : a.value()) s += v;
  const std::size_t ia = a.id();
  return t.record(1, 1, {s}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)[0];
    for (double& v : tp.grad_of(ia)) v += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var dot(Var a, Var b) {
  same_tape(a, b);
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  Tape& t = *a.tape();
  auto av = a.value();
  auto bv = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(1, 1, {s}, [ia, ib](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)[0];
    auto av = tp.value_of(ia);
    auto bv = tp.value_of(ib);
    auto ga = tp.grad_of(ia);
    auto gb = tp.grad_of(ib);
    for (std::size_t i = 0; i < av.size(); ++i) {
      ga[i] += g * bv[i];
      gb[i] += g * av[i];
    }
  });
}

Var pick(Var a, std::size_t index) {
  Tape& t = *a.tape();
  t.check_owned(a);
  if (index >= a.size()) throw std::out_of_range("pick: index out of range");
  const std::size_t ia = a.id();
  return t.record(1, 1, {a.value()[index]}, [ia, index](Tape& tp, std::size_t self) {
    tp.grad_of(ia)[index] += tp.grad_of(self)[0];
  });
}

Var straight_through(Var a, const std::function<double(double)>& fn) {
  return unary(a, fn, [](double) { return 1.0; });
}

Var rnn_cell(Var x, Var h, Var w_in, Var w_rec, Var b) {
  const Var terms[] = {matmul(w_in, x), matmul(w_rec, h), b};
  return squash(add_n(terms));
}

}  // namespace disem::ad
