#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cfcnn/defects.hpp"
#include "cfcnn/errors.hpp"
#include "cfcnn/feature_stack.hpp"
#include "cfcnn/layer.hpp"
#include "cfcnn/network.hpp"

namespace cfcnn {

/// One term (V_X, beta_X) of the tangent penalty R.
template <typename Scalar>
struct TangentTarget {
  FeatureStack<Scalar> v;
  Vec<Scalar> beta;
};

template <typename Scalar>
struct Sample {
  FeatureStack<Scalar> x;
  Vec<Scalar> y;
  std::vector<TangentTarget<Scalar>> tangents;
};

struct TrainConfig {
  double eta = 0.01;
  double lambda = 0.0;
  Index batch_size = 1;
  Index iterations = 1;
  std::uint64_t seed = 1;
  double init_scale = 0.1;

  void validate() const {
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (iterations < 0) throw ConfigError("iterations must be nonnegative");
    if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be nonnegative");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Gradients (or any element of the parameter space) laid out like NetworkState.
template <typename Scalar>
struct GradientSet {
  std::vector<FeatureStack<Scalar>> dW;
  std::vector<FeatureStack<Scalar>> dB;

  static GradientSet zeros(const NetworkSpec<Scalar>& spec) {
    GradientSet g;
    for (const auto& layer : spec.layers()) {
      g.dW.emplace_back(layer.filter_shape());
      g.dB.emplace_back(layer.conv_shape());
    }
    return g;
  }

  Index layers() const { return static_cast<Index>(dW.size()); }

  /// this += alpha * other
  GradientSet& add_scaled(Scalar alpha, const GradientSet& other) {
    if (other.dW.size() != dW.size()) throw DimensionError("GradientSet: layer count mismatch");
    for (std::size_t t = 0; t < dW.size(); ++t) {
      dW[t] = axpy(alpha, other.dW[t], dW[t]);
      dB[t] = axpy(alpha, other.dB[t], dB[t]);
    }
    return *this;
  }

  GradientSet& operator+=(const GradientSet& other) {
    if (other.dW.size() != dW.size()) throw DimensionError("GradientSet: layer count mismatch");
    for (std::size_t t = 0; t < dW.size(); ++t) {
      dW[t] += other.dW[t];
      dB[t] += other.dB[t];
    }
    return *this;
  }

  /// Flat concatenation W^1, B^1, W^2, B^2, ...
  Vec<Scalar> flatten() const {
    Index n = 0;
    for (std::size_t t = 0; t < dW.size(); ++t) n += dW[t].size() + dB[t].size();
    Vec<Scalar> out(n);
    Index pos = 0;
    for (std::size_t t = 0; t < dW.size(); ++t) {
      out.segment(pos, dW[t].size()) = dW[t].coeffs();
      pos += dW[t].size();
      out.segment(pos, dB[t].size()) = dB[t].coeffs();
      pos += dB[t].size();
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace detail {
template <typename Scalar>
void require_sample(const NetworkSpec<Scalar>& spec, const Sample<Scalar>& s) {
  require_shape("sample input", s.x, spec.input_shape());
  if (s.y.size() != spec.classes()) {
    throw DimensionError("sample target has dim " + std::to_string(s.y.size()) + ", network has " +
                         std::to_string(spec.classes()) + " classes");
  }
  for (const auto& tt : s.tangents) {
    require_shape("tangent direction", tt.v, spec.input_shape());
    if (tt.beta.size() != spec.classes()) throw DimensionError("tangent beta has wrong dimension");
  }
}
}  // namespace detail

/// J = 1/2 |F(X) - y|^2
template <typename Scalar>
Scalar loss_J(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state, const Sample<Scalar>& sample) {
  detail::require_sample(spec, sample);
  const auto trace = forward(spec, state, sample.x);
  return Scalar(0.5) * (trace.output - sample.y).squaredNorm();
}

/// R = sum over tangent targets of 1/2 |DF(X) V_X - beta_X|^2; 0 without targets.
template <typename Scalar>
Scalar loss_R(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state, const Sample<Scalar>& sample) {
  detail::require_sample(spec, sample);
  Scalar total(0);
  for (const auto& tt : sample.tangents) {
    const auto trace = forward_tangent(spec, state, sample.x, tt.v);
    total += Scalar(0.5) * (*trace.tangent_out - tt.beta).squaredNorm();
  }
  return total;
}

template <typename Scalar>
Scalar loss_total(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state, const Sample<Scalar>& sample,
                  Scalar lambda) {
  return loss_J(spec, state, sample) + lambda * loss_R(spec, state, sample);
}

// ---------------------------------------------------------------------------
// Backward sweeps
// ---------------------------------------------------------------------------

/// Per-layer gradient contributions delivered by `backward_sweep`.
template <typename Scalar>
struct LayerGradients {
  FeatureStack<Scalar> dW_J, dB_J;
  FeatureStack<Scalar> dW_R, dB_R;  // zero when no tangent targets
};

/// Runs the backward loop t = L..1 of the descent iteration for one sample,
/// calling `visit(t, grads)` for each layer in that order. All error
/// propagation uses `state`, i.e. the parameters as they were before any
/// update, so `visit` may overwrite a separate copy of layer t in place.
///
/// Channels: e_y carries D^*omega_{t+1}(X - y); for each tangent target,
/// e_v carries D^*omega_{t+1}(V^{L+1} - beta) and e_w carries
/// (V^{t+1} _| D^2 omega_{t+1})^*(V^{L+1} - beta), seeded with 0.
template <typename Scalar, typename Visit>
void backward_sweep(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state, const Sample<Scalar>& sample,
                    bool with_tangents, Visit&& visit) {
  detail::require_sample(spec, sample);
  const Index L = spec.depth();
  const ForwardTrace<Scalar> primal = forward(spec, state, sample.x);

  std::vector<ForwardTrace<Scalar>> tangent_traces;
  std::vector<FeatureStack<Scalar>> e_w, e_v;
  if (with_tangents) {
    for (const auto& tt : sample.tangents) {
      tangent_traces.push_back(forward_tangent(spec, state, sample.x, tt.v));
      e_v.push_back(from_depth_vector<Scalar>(*tangent_traces.back().tangent_out - tt.beta));
      e_w.push_back(FeatureStack<Scalar>(Shape{1, 1, spec.classes()}));
    }
  }
  FeatureStack<Scalar> e_y = from_depth_vector<Scalar>(primal.output - sample.y);

  for (Index t = L; t >= 1; --t) {
    const auto idx = static_cast<std::size_t>(t - 1);
    if (t < L) {
      const auto& next_spec = spec.layer(t + 1);
      const auto& next_params = state.layer(t + 1);
      e_y = layer_df_adjoint(next_spec, primal.caches[idx + 1], next_params, e_y);
      for (std::size_t i = 0; i < tangent_traces.size(); ++i) {
        const auto& cache = tangent_traces[i].caches[idx + 1];
        // the e_w update must see the old e_v
        e_w[i] = layer_df_adjoint(next_spec, cache, next_params, e_w[i]) +
                 layer_d2_xx_adjoint(next_spec, cache, next_params, *cache.v_in, e_v[i]);
        e_v[i] = layer_df_adjoint(next_spec, cache, next_params, e_v[i]);
      }
    }

    const auto& ls = spec.layer(t);
    const auto& lp = state.layer(t);
    LayerGradients<Scalar> grads{layer_grad_w_adjoint(ls, primal.caches[idx], e_y),
                                 layer_grad_b_adjoint(ls, primal.caches[idx], e_y),
                                 FeatureStack<Scalar>(ls.filter_shape()), FeatureStack<Scalar>(ls.conv_shape())};
    for (std::size_t i = 0; i < tangent_traces.size(); ++i) {
      const auto& cache = tangent_traces[i].caches[idx];
      const bool swapped = defect_active(Defect::TangentErrorsSwapped);
      const auto& first = swapped ? e_v[i] : e_w[i];
      const auto& second = swapped ? e_w[i] : e_v[i];
      // grad^*_theta f_t e_w + (V^t _| D grad_theta f_t)^* e_v
      grads.dW_R += layer_grad_w_adjoint(ls, cache, first);
      grads.dW_R += layer_d2_mixed_w_adjoint(ls, cache, lp, *cache.v_in, second);
      grads.dB_R += layer_grad_b_adjoint(ls, cache, first);
      grads.dB_R += layer_d2_mixed_b_adjoint(ls, cache, lp, *cache.v_in, second);
    }
    if (defect_active(Defect::GradientSignFlip)) {
      grads.dW_J *= Scalar(-1);
      grads.dB_J *= Scalar(-1);
    }
    visit(t, grads);
  }
}

/// grad_theta J for every layer.
template <typename Scalar>
GradientSet<Scalar> grads_first_order(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                                      const Sample<Scalar>& sample) {
  auto out = GradientSet<Scalar>::zeros(spec);
  backward_sweep(spec, state, sample, false, [&](Index t, LayerGradients<Scalar>& g) {
    out.dW[static_cast<std::size_t>(t - 1)] = std::move(g.dW_J);
    out.dB[static_cast<std::size_t>(t - 1)] = std::move(g.dB_J);
  });
  return out;
}

/// grad_theta R for every layer, summed over the sample's tangent targets.
template <typename Scalar>
GradientSet<Scalar> grads_higher_order(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                                       const Sample<Scalar>& sample) {
  auto out = GradientSet<Scalar>::zeros(spec);
  if (sample.tangents.empty()) return out;
  backward_sweep(spec, state, sample, true, [&](Index t, LayerGradients<Scalar>& g) {
    out.dW[static_cast<std::size_t>(t - 1)] = std::move(g.dW_R);
    out.dB[static_cast<std::size_t>(t - 1)] = std::move(g.dB_R);
  });
  return out;
}

/// grad J + lambda grad R
template <typename Scalar>
GradientSet<Scalar> grads_total(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                                const Sample<Scalar>& sample, Scalar lambda) {
  auto out = GradientSet<Scalar>::zeros(spec);
  const bool tangents = lambda != Scalar(0) && !sample.tangents.empty();
  backward_sweep(spec, state, sample, tangents, [&](Index t, LayerGradients<Scalar>& g) {
    const auto i = static_cast<std::size_t>(t - 1);
    out.dW[i] = tangents ? axpy(lambda, g.dW_R, g.dW_J) : std::move(g.dW_J);
    out.dB[i] = tangents ? axpy(lambda, g.dB_R, g.dB_J) : std::move(g.dB_J);
  });
  return out;
}

/// Sum of per-sample grads_total in batch order.
template <typename Scalar>
GradientSet<Scalar> batch_gradients(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                                    const std::vector<Sample<Scalar>>& batch, Scalar lambda) {
  if (batch.empty()) throw std::invalid_argument("batch_gradients: empty batch");
  GradientSet<Scalar> total = grads_total(spec, state, batch.front(), lambda);
  for (std::size_t i = 1; i < batch.size(); ++i) total += grads_total(spec, state, batch[i], lambda);
  return total;
}

template <typename Scalar>
void require_second_order_allowed(const NetworkSpec<Scalar>& spec, Scalar lambda) {
  if (lambda == Scalar(0)) return;
  for (Index t = 1; t <= spec.depth(); ++t) {
    if (!spec.layer(t).nl.smooth()) {
      throw ConfigError("layer " + std::to_string(t) +
                        ": relu cannot be combined with lambda > 0 (the tangent penalty needs sigma'')");
    }
  }
}

/// theta <- theta - eta * sum_batch (grad J + lambda grad R), one update.
template <typename Scalar>
NetworkState<Scalar> descent_step(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                                  const std::vector<Sample<Scalar>>& batch, const TrainConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("descent_step: empty batch");
  const auto lambda = static_cast<Scalar>(cfg.lambda);
  require_second_order_allowed(spec, lambda);
  const auto grads = batch_gradients(spec, state, batch, lambda);
  NetworkState<Scalar> next = state;
  const auto eta = static_cast<Scalar>(cfg.eta);
  for (std::size_t t = 0; t < next.params.size(); ++t) {
    next.params[t].b = axpy(-eta, grads.dB[t], next.params[t].b);
    next.params[t].w.filters = axpy(-eta, grads.dW[t], next.params[t].w.filters);
  }
  return next;
}

/// One descent iteration for one sample in the printed order: layer t is
/// updated inside the backward loop, with the errors for layer t-1 formed
/// from the stored pre-update parameters.
template <typename Scalar>
NetworkState<Scalar> descent_iteration(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                                       const Sample<Scalar>& sample, Scalar eta, Scalar lambda) {
  require_second_order_allowed(spec, lambda);
  NetworkState<Scalar> next = state;
  const bool tangents = lambda != Scalar(0) && !sample.tangents.empty();
  backward_sweep(spec, state, sample, tangents, [&](Index t, LayerGradients<Scalar>& g) {
    auto& p = next.layer(t);
    const auto dB = tangents ? axpy(lambda, g.dB_R, g.dB_J) : g.dB_J;
    const auto dW = tangents ? axpy(lambda, g.dW_R, g.dW_J) : g.dW_J;
    p.b = axpy(-eta, dB, p.b);
    p.w.filters = axpy(-eta, dW, p.w.filters);
  });
  return next;
}

/// Filters i.i.d. uniform on [-init_scale, init_scale] from a seeded
/// mt19937_64, drawn layer by layer in storage order; biases zero.
template <typename Scalar>
NetworkState<Scalar> init_params(const NetworkSpec<Scalar>& spec, std::uint64_t seed, Scalar init_scale) {
  NetworkState<Scalar> state = zero_state(spec);
  if (init_scale == Scalar(0)) return state;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> dist(-init_scale, init_scale);
  for (auto& p : state.params) {
    for (auto& w : p.w.filters.coeffs()) w = dist(rng);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

enum class TrainMode { Single, Batch };

struct CurvePoint {
  Index iteration = 0;
  double J = 0.0;
  double R = 0.0;
  double total = 0.0;
};

/// Losses summed over a data set.
template <typename Scalar>
CurvePoint dataset_losses(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                          const std::vector<Sample<Scalar>>& data, Scalar lambda) {
  CurvePoint p;
  for (const auto& s : data) {
    p.J += static_cast<double>(loss_J(spec, state, s));
    p.R += static_cast<double>(loss_R(spec, state, s));
  }
  p.total = p.J + static_cast<double>(lambda) * p.R;
  return p;
}

/// Runs cfg.iterations iterations. Iteration i draws the next batch_size
/// samples cyclically in data order; Batch mode applies one summed update,
/// Single mode applies descent_iteration sample by sample. After each
/// iteration the data-set losses are passed to `on_iteration`.
template <typename Scalar>
NetworkState<Scalar> train(const NetworkSpec<Scalar>& spec, NetworkState<Scalar> state,
                           const std::vector<Sample<Scalar>>& data, const TrainConfig& cfg, TrainMode mode,
                           const std::function<void(const CurvePoint&)>& on_iteration = {}) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty data set");
  const auto lambda = static_cast<Scalar>(cfg.lambda);
  const auto eta = static_cast<Scalar>(cfg.eta);
  require_second_order_allowed(spec, lambda);
  std::size_t cursor = 0;
  for (Index it = 1; it <= cfg.iterations; ++it) {
    std::vector<Sample<Scalar>> batch;
    for (Index b = 0; b < cfg.batch_size; ++b) {
      batch.push_back(data[cursor]);
      cursor = (cursor + 1) % data.size();
    }
    if (mode == TrainMode::Batch) {
      state = descent_step(spec, state, batch, cfg);
    } else {
      for (const auto& s : batch) state = descent_iteration(spec, state, s, eta, lambda);
    }
    if (on_iteration) {
      auto point = dataset_losses(spec, state, data, lambda);
      point.iteration = it;
      on_iteration(point);
    }
  }
  return state;
}

}  // namespace cfcnn
