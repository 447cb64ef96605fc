#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfcnn/errors.hpp"
#include "cfcnn/feature_stack.hpp"
#include "cfcnn/layer.hpp"

namespace cfcnn {

/// Shapes of F = f_L o ... o f_1, checked once at construction: consecutive
/// layers chain, and the last layer is fully connected onto 1x1xN.
template <typename Scalar>
class NetworkSpec {
 public:
  NetworkSpec() = default;

  explicit NetworkSpec(std::vector<LayerSpec<Scalar>> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("network: at least one layer is required");
    for (std::size_t t = 0; t < layers_.size(); ++t) {
      try {
        layers_[t].validate();
      } catch (const std::exception& ex) {
        throw ConfigError("layer " + std::to_string(t + 1) + ": " + ex.what());
      }
      if (layers_[t].is_final && t + 1 != layers_.size()) {
        throw ConfigError("layer " + std::to_string(t + 1) + ": only the last layer may be final");
      }
      if (t > 0 && layers_[t - 1].output_shape() != layers_[t].input_shape()) {
        throw ConfigError("layer " + std::to_string(t) + " output " + layers_[t - 1].output_shape().str() +
                          " does not match layer " + std::to_string(t + 1) + " input " +
                          layers_[t].input_shape().str());
      }
    }
    const auto& last = layers_.back();
    if (!last.is_final) throw ConfigError("layer " + std::to_string(layers_.size()) + ": last layer must be final");
    const Shape out = last.output_shape();
    if (out.rows != 1 || out.cols != 1) {
      throw ConfigError("layer " + std::to_string(layers_.size()) + ": final output must be 1x1xN, got " + out.str());
    }
  }

  const std::vector<LayerSpec<Scalar>>& layers() const { return layers_; }
  const LayerSpec<Scalar>& layer(Index t) const { return layers_.at(static_cast<std::size_t>(t - 1)); }
  Index depth() const { return static_cast<Index>(layers_.size()); }
  Index classes() const { return layers_.back().out_depth; }
  Shape input_shape() const { return layers_.front().input_shape(); }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;

 private:
  std::vector<LayerSpec<Scalar>> layers_;
};

/// Parameters {W^t, B^t}, t = 1..L.
template <typename Scalar>
struct NetworkState {
  std::vector<LayerParams<Scalar>> params;

  const LayerParams<Scalar>& layer(Index t) const { return params.at(static_cast<std::size_t>(t - 1)); }
  LayerParams<Scalar>& layer(Index t) { return params.at(static_cast<std::size_t>(t - 1)); }

  friend bool operator==(const NetworkState& a, const NetworkState& b) {
    if (a.params.size() != b.params.size()) return false;
    for (std::size_t t = 0; t < a.params.size(); ++t) {
      const auto& x = a.params[t];
      const auto& y = b.params[t];
      if (!(x.w.filters == y.w.filters) || !(x.b == y.b) || !same_vectors(x.w.mixing, y.w.mixing)) return false;
    }
    return true;
  }
};

template <typename Scalar>
NetworkState<Scalar> zero_state(const NetworkSpec<Scalar>& spec) {
  NetworkState<Scalar> state;
  for (const auto& layer : spec.layers()) state.params.push_back(zero_params(layer));
  return state;
}

template <typename Scalar>
void require_compatible(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state) {
  if (static_cast<Index>(state.params.size()) != spec.depth()) {
    throw DimensionError("network state has " + std::to_string(state.params.size()) + " layers, spec has " +
                         std::to_string(spec.depth()));
  }
  for (Index t = 1; t <= spec.depth(); ++t) {
    const auto& ls = spec.layer(t);
    const auto& lp = state.layer(t);
    if (lp.w.filters.shape() != ls.filter_shape() || lp.b.shape() != ls.conv_shape() ||
        lp.w.mixing.size() != ls.mixing.size()) {
      throw DimensionError("network state layer " + std::to_string(t) + " does not match its spec");
    }
  }
}

template <typename Scalar>
struct ForwardTrace {
  std::vector<LayerCache<Scalar>> caches;  // layer t at index t-1
  Vec<Scalar> output;                      // X^{L+1}
  std::optional<Vec<Scalar>> tangent_out;  // V^{L+1}
};

template <typename Scalar>
ForwardTrace<Scalar> forward(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                             const FeatureStack<Scalar>& x) {
  ForwardTrace<Scalar> trace;
  trace.caches.reserve(static_cast<std::size_t>(spec.depth()));
  FeatureStack<Scalar> current = x;
  for (Index t = 1; t <= spec.depth(); ++t) {
    auto step = layer_forward(spec.layer(t), state.layer(t), current);
    current = std::move(step.out);
    trace.caches.push_back(std::move(step.cache));
  }
  trace.output = depth_vector(current);
  return trace;
}

/// Primal pass plus V^{t+1} = Psi_t(S'_t(Z^t) . C^t(W^t, V^t)), V^1 = v.
template <typename Scalar>
ForwardTrace<Scalar> forward_tangent(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                                     const FeatureStack<Scalar>& x, const FeatureStack<Scalar>& v) {
  detail::require_shape("forward_tangent direction", v, x.shape());
  ForwardTrace<Scalar> trace = forward(spec, state, x);
  FeatureStack<Scalar> tangent = v;
  for (Index t = 1; t <= spec.depth(); ++t) {
    const auto& ls = spec.layer(t);
    auto& cache = trace.caches[static_cast<std::size_t>(t - 1)];
    cache.v_in = tangent;
    cache.v_tangent_z = convolve(state.layer(t).w, tangent, ls.geometry);
    tangent = pool_avg(dS_apply(ls.nl, cache.z, *cache.v_tangent_z), ls.pool);
  }
  trace.tangent_out = depth_vector(tangent);
  return trace;
}

/// D omega_t(X^t) u, with omega_t = f_L o ... o f_t; t = L+1 is the identity.
template <typename Scalar>
Vec<Scalar> omega_apply(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                        const ForwardTrace<Scalar>& trace, Index t, const FeatureStack<Scalar>& u) {
  if (t < 1 || t > spec.depth() + 1) throw RangeError("omega_apply: t=" + std::to_string(t) + " out of range");
  FeatureStack<Scalar> current = u;
  for (Index s = t; s <= spec.depth(); ++s) {
    current = layer_df_apply(spec.layer(s), trace.caches[static_cast<std::size_t>(s - 1)], state.layer(s), current);
  }
  return depth_vector(current);
}

/// D^* omega_t(X^t) e, folded backwards: D^* omega_t = D^* f_t . D^* omega_{t+1}.
template <typename Scalar>
FeatureStack<Scalar> omega_adjoint_apply(const NetworkSpec<Scalar>& spec, const NetworkState<Scalar>& state,
                                         const ForwardTrace<Scalar>& trace, Index t, const Vec<Scalar>& e) {
  if (t < 1 || t > spec.depth() + 1) {
    throw RangeError("omega_adjoint_apply: t=" + std::to_string(t) + " outside 1.." +
                     std::to_string(spec.depth() + 1));
  }
  if (e.size() != spec.classes()) throw DimensionError("omega_adjoint_apply: error vector has wrong dimension");
  FeatureStack<Scalar> current = from_depth_vector(e);
  for (Index s = spec.depth(); s >= t; --s) {
    current = layer_df_adjoint(spec.layer(s), trace.caches[static_cast<std::size_t>(s - 1)], state.layer(s), current);
  }
  return current;
}

}  // namespace cfcnn
