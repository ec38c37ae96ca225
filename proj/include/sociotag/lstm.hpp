#pragma once

#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

#include "sociotag/error.hpp"
#include "sociotag/numerics.hpp"
#include "sociotag/rng.hpp"

namespace sociotag {

enum class Direction { forward, backward };

/// One LSTM layer. `weights` is 4H x (in + H) over [x; h_prev], gate blocks
/// ordered input, forget, output, candidate; `bias` is 1 x 4H.
struct LstmLayer {
  ParamId weights = 0;
  ParamId bias = 0;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
};

template <typename Real>
inline LstmLayer add_lstm(ParamStore<Real>& store, const std::string& name, std::size_t input_dim,
                          std::size_t hidden) {
  LstmLayer l;
  l.input_dim = input_dim;
  l.hidden = hidden;
  l.weights = store.add(name + ".W", 4 * hidden, input_dim + hidden);
  l.bias = store.add(name + ".b", 1, 4 * hidden);
  return l;
}

template <typename Real>
inline void init_lstm(ParamStore<Real>& store, const LstmLayer& l, Rng& rng) {
  xavier_fill(store[l.weights], rng);
  std::fill(store[l.bias].value.begin(), store[l.bias].value.end(), Real(0));
}

// Per-step activations kept for the backward pass, in processing order.
template <typename Real>
struct LstmCache {
  Direction direction = Direction::forward;
  Mat<Real> xh;     // [x_t; h_prev]
  Mat<Real> gates;  // i, f, o, g after their nonlinearities
  Mat<Real> c_prev;
  Mat<Real> tanh_c;
};

/// Runs the recurrence over `inputs` (one row per position). With
/// Direction::backward the sequence is consumed last-to-first. Either way
/// output row t is the hidden state produced at input position t.
template <typename Real>
inline Mat<Real> lstm_sequence_forward(const ParamStore<Real>& store, const LstmLayer& l,
                                       const Mat<Real>& inputs, Direction dir,
                                       std::type_identity_t<LstmCache<Real>>* cache = nullptr) {
  const std::size_t n = inputs.rows;
  const std::size_t H = l.hidden;
  const std::size_t D = l.input_dim;
  if (n > 0 && inputs.cols != D) {
    throw UsageError("lstm: input dim " + std::to_string(inputs.cols) + " != " + std::to_string(D));
  }
  const auto& W = store[l.weights].value;
  const auto& b = store[l.bias].value;

  Mat<Real> out(n, H);
  if (cache) {
    cache->direction = dir;
    cache->xh = Mat<Real>(n, D + H);
    cache->gates = Mat<Real>(n, 4 * H);
    cache->c_prev = Mat<Real>(n, H);
    cache->tanh_c = Mat<Real>(n, H);
  }
  std::vector<Real> h(H, Real(0)), c(H, Real(0)), xh(D + H), z(4 * H);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = dir == Direction::forward ? s : n - 1 - s;
    std::copy(inputs.row(t).begin(), inputs.row(t).end(), xh.begin());
    std::copy(h.begin(), h.end(), xh.begin() + static_cast<std::ptrdiff_t>(D));
    std::copy(b.begin(), b.end(), z.begin());
    matvec_add<Real>(W, 4 * H, D + H, xh, z);
    if (cache) {
      std::copy(xh.begin(), xh.end(), cache->xh.row(s).begin());
      std::copy(c.begin(), c.end(), cache->c_prev.row(s).begin());
    }
    for (std::size_t j = 0; j < H; ++j) {
      const Real ig = sigmoid(z[j]);
      const Real fg = sigmoid(z[H + j]);
      const Real og = sigmoid(z[2 * H + j]);
      const Real gg = std::tanh(z[3 * H + j]);
      c[j] = fg * c[j] + ig * gg;
      const Real tc = std::tanh(c[j]);
      h[j] = og * tc;
      if (cache) {
        auto gr = cache->gates.row(s);
        gr[j] = ig;
        gr[H + j] = fg;
        gr[2 * H + j] = og;
        gr[3 * H + j] = gg;
        cache->tanh_c(s, j) = tc;
      }
    }
    std::copy(h.begin(), h.end(), out.row(t).begin());
  }
  return out;
}

/// Backpropagates `d_out` (aligned with output rows) through the cached
/// forward pass, accumulating parameter gradients and returning d_inputs.
template <typename Real>
inline Mat<Real> lstm_sequence_backward(ParamStore<Real>& store, const LstmLayer& l,
                                        const LstmCache<Real>& cache, const Mat<Real>& d_out) {
  const std::size_t n = cache.xh.rows;
  const std::size_t H = l.hidden;
  const std::size_t D = l.input_dim;
  auto& Wp = store[l.weights];
  auto& bp = store[l.bias];

  Mat<Real> d_in(n, D);
  std::vector<Real> dh_next(H, Real(0)), dc_next(H, Real(0)), dz(4 * H), dxh(D + H);
  for (std::size_t s = n; s-- > 0;) {
    const std::size_t t = cache.direction == Direction::forward ? s : n - 1 - s;
    const auto gr = cache.gates.row(s);
    const auto cp = cache.c_prev.row(s);
    const auto tc = cache.tanh_c.row(s);
    for (std::size_t j = 0; j < H; ++j) {
      const Real ig = gr[j], fg = gr[H + j], og = gr[2 * H + j], gg = gr[3 * H + j];
      const Real dh = d_out(t, j) + dh_next[j];
      const Real d_o = dh * tc[j];
      const Real dc = dc_next[j] + dh * og * (Real(1) - tc[j] * tc[j]);
      dz[j] = dc * gg * ig * (Real(1) - ig);
      dz[H + j] = dc * cp[j] * fg * (Real(1) - fg);
      dz[2 * H + j] = d_o * og * (Real(1) - og);
      dz[3 * H + j] = dc * ig * (Real(1) - gg * gg);
      dc_next[j] = dc * fg;
    }
    outer_add<Real>(dz, cache.xh.row(s), D + H, Wp.grad);
    for (std::size_t k = 0; k < 4 * H; ++k) bp.grad[k] += dz[k];
    std::fill(dxh.begin(), dxh.end(), Real(0));
    matvec_t_add<Real>(Wp.value, 4 * H, D + H, dz, dxh);
    std::copy(dxh.begin(), dxh.begin() + static_cast<std::ptrdiff_t>(D), d_in.row(t).begin());
    std::copy(dxh.begin() + static_cast<std::ptrdiff_t>(D), dxh.end(), dh_next.begin());
  }
  return d_in;
}

}  // namespace sociotag
