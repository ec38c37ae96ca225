#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sociotag/error.hpp"
#include "sociotag/rng.hpp"

namespace sociotag {

/// Row-major dense matrix; sequences of vectors are stored one per row.
template <typename Real>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, Real fill = Real(0)) : rows(r), cols(c), data(r * c, fill) {}

  std::span<Real> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const Real> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  Real& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Trainable array plus its gradient and Adam moments.
template <typename Real>
struct Param {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> value;
  std::vector<Real> grad;
  std::vector<Real> m;
  std::vector<Real> v;
  std::uint64_t step = 0;
  bool trainable = true;

  std::size_t size() const noexcept { return value.size(); }
  std::span<Real> row(std::size_t r) { return {value.data() + r * cols, cols}; }
  std::span<const Real> row(std::size_t r) const { return {value.data() + r * cols, cols}; }
  std::span<Real> grad_row(std::size_t r) { return {grad.data() + r * cols, cols}; }
};

using ParamId = std::size_t;

template <typename Real>
class ParamStore {
 public:
  using value_type = Real;

  ParamId add(std::string name, std::size_t rows, std::size_t cols) {
    if (index_.count(name)) throw UsageError("duplicate parameter '" + name + "'");
    Param<Real> p;
    p.name = name;
    p.rows = rows;
    p.cols = cols;
    p.value.assign(rows * cols, Real(0));
    p.grad.assign(rows * cols, Real(0));
    p.m.assign(rows * cols, Real(0));
    p.v.assign(rows * cols, Real(0));
    index_.emplace(std::move(name), params_.size());
    params_.push_back(std::move(p));
    return params_.size() - 1;
  }

  Param<Real>& operator[](ParamId id) { return params_.at(id); }
  const Param<Real>& operator[](ParamId id) const { return params_.at(id); }

  std::optional<ParamId> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const noexcept { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), Real(0));
  }

  // Copies values only; shapes must match.
  void copy_values_from(const ParamStore& other) {
    if (other.params_.size() != params_.size()) throw UsageError("copy_values_from: store layout differs");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (other.params_[i].size() != params_[i].size()) {
        throw UsageError("copy_values_from: shape mismatch for '" + params_[i].name + "'");
      }
      params_[i].value = other.params_[i].value;
    }
  }

 private:
  std::vector<Param<Real>> params_;
  std::unordered_map<std::string, ParamId> index_;
};

// ---------------------------------------------------------------------------
// Dense kernels.

// y += W x, with W rows×cols and x of length cols.
template <typename Real>
inline void matvec_add(std::span<const Real> w, std::size_t rows, std::size_t cols,
                       std::span<const Real> x, std::span<Real> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* wr = w.data() + r * cols;
    Real acc = 0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

// x_grad += W^T dy.
template <typename Real>
inline void matvec_t_add(std::span<const Real> w, std::size_t rows, std::size_t cols,
                         std::span<const Real> dy, std::span<Real> dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const Real d = dy[r];
    if (d == Real(0)) continue;
    const Real* wr = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += wr[c] * d;
  }
}

// G += dy x^T.
template <typename Real>
inline void outer_add(std::span<const Real> dy, std::span<const Real> x, std::size_t cols,
                      std::span<Real> g) {
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const Real d = dy[r];
    if (d == Real(0)) continue;
    Real* gr = g.data() + r * cols;
    for (std::size_t c = 0; c < x.size(); ++c) gr[c] += d * x[c];
  }
}

template <typename Real>
inline Real sigmoid(Real x) {
  if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

template <typename Real>
inline Real log_sum_exp(std::span<const Real> x) {
  if (x.empty()) return -std::numeric_limits<Real>::infinity();
  const Real mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) return mx;
  Real s = 0;
  for (Real v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

/// Max-shifted softmax; outputs are non-negative and sum to one.
template <typename Real>
inline std::vector<Real> softmax(std::span<const Real> logits) {
  std::vector<Real> out(logits.size());
  if (logits.empty()) return out;
  const Real mx = *std::max_element(logits.begin(), logits.end());
  Real s = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    s += out[i];
  }
  for (auto& v : out) v /= s;
  return out;
}

// ---------------------------------------------------------------------------
// Initializers, dropout.

/// Glorot/Xavier uniform: entries in ±sqrt(6 / (rows + cols)).
template <typename Real = double>
inline std::vector<Real> xavier_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) throw UsageError("xavier_init: rows and cols must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<Real> out(rows * cols);
  for (auto& x : out) x = static_cast<Real>(rng.uniform(-bound, bound));
  return out;
}

template <typename Real>
inline void xavier_fill(Param<Real>& p, Rng& rng, double scale = 1.0) {
  p.value = xavier_init<Real>(p.rows, p.cols, rng);
  if (scale != 1.0) {
    for (auto& x : p.value) x = static_cast<Real>(x * scale);
  }
}

/// Inverted-dropout multipliers: 0 with probability `rate`, else 1/(1-rate).
/// Outside training the mask is all ones.
template <typename Real>
inline std::vector<Real> dropout_mask(std::size_t n, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("dropout: rate must be in [0, 1)");
  std::vector<Real> mask(n, Real(1));
  if (!training || rate == 0.0) return mask;
  const Real keep = static_cast<Real>(1.0 / (1.0 - rate));
  for (auto& m : mask) m = rng.uniform() < rate ? Real(0) : keep;
  return mask;
}

template <typename Real>
inline std::vector<Real> dropout_apply(std::span<const Real> x, double rate, Rng& rng, bool training) {
  const auto mask = dropout_mask<Real>(x.size(), rate, rng, training);
  std::vector<Real> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

// ---------------------------------------------------------------------------
// Optimization.

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

namespace detail {

template <typename Real>
inline void adam_update(Param<Real>& p, std::size_t begin, std::size_t end, const AdamConfig& cfg) {
  const double t = static_cast<double>(p.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const Real b1 = static_cast<Real>(cfg.beta1);
  const Real b2 = static_cast<Real>(cfg.beta2);
  for (std::size_t i = begin; i < end; ++i) {
    const Real g = p.grad[i];
    p.m[i] = b1 * p.m[i] + (Real(1) - b1) * g;
    p.v[i] = b2 * p.v[i] + (Real(1) - b2) * g * g;
    const double mhat = static_cast<double>(p.m[i]) / c1;
    const double vhat = static_cast<double>(p.v[i]) / c2;
    p.value[i] = static_cast<Real>(static_cast<double>(p.value[i]) -
                                   cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

}  // namespace detail

/// Bias-corrected Adam over every trainable parameter, using the gradients
/// held in the store.
template <typename Real>
inline void adam_step(ParamStore<Real>& store, const AdamConfig& cfg = {}) {
  for (auto& p : store) {
    if (!p.trainable) continue;
    ++p.step;
    detail::adam_update(p, 0, p.size(), cfg);
  }
}

/// Adam with externally supplied gradients, one array per parameter in
/// store order.
template <typename Real>
inline void adam_step(ParamStore<Real>& store, std::span<const std::vector<Real>> grads,
                      const AdamConfig& cfg = {}) {
  if (grads.size() != store.size()) throw UsageError("adam_step: gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != store[i].size()) {
      throw UsageError("adam_step: gradient shape mismatch for '" + store[i].name + "'");
    }
  }
  for (std::size_t i = 0; i < grads.size(); ++i) store[i].grad = grads[i];
  adam_step(store, cfg);
}

/// Adam on a single dense parameter.
template <typename Real>
inline void adam_step_param(Param<Real>& p, const AdamConfig& cfg = {}) {
  ++p.step;
  detail::adam_update(p, 0, p.size(), cfg);
}

/// Lazy Adam for a sparse parameter: only the listed rows are updated, with
/// the parameter's step count advanced once.
template <typename Real>
inline void adam_step_rows(Param<Real>& p, std::span<const std::size_t> rows, const AdamConfig& cfg = {}) {
  ++p.step;
  for (std::size_t r : rows) detail::adam_update(p, r * p.cols, (r + 1) * p.cols, cfg);
}

/// lambda * sum of squares over trainable parameters.
template <typename Real>
inline double l2_penalty(const ParamStore<Real>& store, double lambda) {
  double s = 0.0;
  for (const auto& p : store) {
    if (!p.trainable) continue;
    for (Real x : p.value) s += static_cast<double>(x) * static_cast<double>(x);
  }
  return lambda * s;
}

template <typename Real>
inline void add_l2_grad(ParamStore<Real>& store, double lambda) {
  const Real k = static_cast<Real>(2.0 * lambda);
  for (auto& p : store) {
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] += k * p.value[i];
  }
}

// ---------------------------------------------------------------------------
// Gradient checking.

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients against central differences for every
/// coordinate of every trainable parameter. `loss` evaluates the objective
/// from the store's current values and, when its argument is true, also
/// accumulates the analytic gradient into the (zeroed) store gradients.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
template <typename Real>
inline GradCheckResult grad_check(ParamStore<Real>& store, const std::function<double(bool)>& loss,
                                  double epsilon = 1e-4) {
  store.zero_grad();
  loss(true);
  std::vector<std::vector<Real>> analytic;
  for (const auto& p : store) analytic.push_back(p.grad);

  GradCheckResult res;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    auto& p = store[pi];
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Real orig = p.value[i];
      p.value[i] = static_cast<Real>(orig + epsilon);
      const double up = loss(false);
      p.value[i] = static_cast<Real>(orig - epsilon);
      const double down = loss(false);
      p.value[i] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = static_cast<double>(analytic[pi][i]);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++res.coordinates;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p.name;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Serialization of named arrays.

template <typename Real>
inline nlohmann::json arrays_to_json(const ParamStore<Real>& store) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& p : store) {
    std::vector<double> data(p.value.begin(), p.value.end());
    out[p.name] = {{"rows", p.rows}, {"cols", p.cols}, {"data", std::move(data)}};
  }
  return out;
}

/// Loads values into an already-shaped store; every parameter must be
/// present with the same shape.
template <typename Real>
inline void arrays_from_json(ParamStore<Real>& store, const nlohmann::json& arrays) {
  for (auto& p : store) {
    if (!arrays.contains(p.name)) throw DataError("checkpoint is missing array '" + p.name + "'");
    const nlohmann::json& a = arrays.at(p.name);
    if (a.at("rows").get<std::size_t>() != p.rows || a.at("cols").get<std::size_t>() != p.cols) {
      throw DataError("checkpoint array '" + p.name + "' has the wrong shape");
    }
    const auto data = a.at("data").get<std::vector<double>>();
    if (data.size() != p.size()) throw DataError("checkpoint array '" + p.name + "' has the wrong size");
    for (std::size_t i = 0; i < data.size(); ++i) p.value[i] = static_cast<Real>(data[i]);
  }
}

}  // namespace sociotag
