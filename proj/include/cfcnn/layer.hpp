#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfcnn/defects.hpp"
#include "cfcnn/errors.hpp"
#include "cfcnn/feature_stack.hpp"
#include "cfcnn/operators.hpp"

namespace cfcnn {

/// Static configuration of one layer f(X; W, B) = Psi(S(C(W, X) + B)).
template <typename Scalar>
struct LayerSpec {
  ConvGeometry geometry;
  Index pool = 1;
  Nonlinearity nl{};
  Index in_depth = 1;
  Index out_depth = 1;
  bool is_final = false;
  /// One vector in R^{in_depth} per output slice. Filled with all-ones by
  /// `make_layer` when left empty.
  std::vector<Vec<Scalar>> mixing;

  Shape input_shape() const { return {geometry.in_rows(), geometry.in_cols(), in_depth}; }
  Shape conv_shape() const { return {geometry.out_rows(), geometry.out_cols(), out_depth}; }
  Shape output_shape() const { return {geometry.out_rows() / pool, geometry.out_cols() / pool, out_depth}; }
  Shape filter_shape() const { return {geometry.filter_rows(), geometry.filter_cols(), out_depth}; }

  void validate() const {
    if (in_depth <= 0 || out_depth <= 0) throw ConfigError("layer: depths must be positive");
    detail::require_pool("layer", {geometry.out_rows(), geometry.out_cols(), out_depth}, pool);
    detail::require_mixing("layer", mixing, out_depth, in_depth);
    if (is_final) {
      if (geometry.filter_rows() != geometry.in_rows() || geometry.filter_cols() != geometry.in_cols() ||
          geometry.stride() != 1 || pool != 1) {
        throw ConfigError("final layer must be fully connected: filter = input dims, stride 1, pool 1");
      }
    }
  }

  friend bool operator==(const LayerSpec& a, const LayerSpec& b) {
    return a.geometry == b.geometry && a.pool == b.pool && a.nl == b.nl && a.in_depth == b.in_depth &&
           a.out_depth == b.out_depth && a.is_final == b.is_final && same_vectors(a.mixing, b.mixing);
  }
};

template <typename Scalar>
LayerSpec<Scalar> make_layer(const ConvGeometry& g, Index in_depth, Index out_depth, Nonlinearity nl,
                             Index pool = 1, bool is_final = false, std::vector<Vec<Scalar>> mixing = {}) {
  LayerSpec<Scalar> spec{g, pool, nl, in_depth, out_depth, is_final, std::move(mixing)};
  if (spec.mixing.empty()) spec.mixing = full_mixing<Scalar>(in_depth, out_depth);
  spec.validate();
  return spec;
}

/// Fully connected final layer on an input of the given shape.
template <typename Scalar>
LayerSpec<Scalar> make_final_layer(const Shape& input, Index classes, Nonlinearity nl) {
  return make_layer<Scalar>(ConvGeometry(input.rows, input.cols, input.rows, input.cols, 1), input.depth,
                            classes, nl, 1, true);
}

template <typename Scalar>
struct LayerParams {
  FilterBank<Scalar> w;
  FeatureStack<Scalar> b;  // conv-shaped bias
};

template <typename Scalar>
LayerParams<Scalar> zero_params(const LayerSpec<Scalar>& spec) {
  return {FilterBank<Scalar>{FeatureStack<Scalar>(spec.filter_shape()), spec.mixing},
          FeatureStack<Scalar>(spec.conv_shape())};
}

/// Quantities from one forward evaluation that the derivative actions reuse.
template <typename Scalar>
struct LayerCache {
  FeatureStack<Scalar> x;    // input X^t
  FeatureStack<Scalar> z;    // Z^t = C(W, X) + B
  FeatureStack<Scalar> out;  // X^{t+1}
  std::optional<FeatureStack<Scalar>> v_in;        // V^t
  std::optional<FeatureStack<Scalar>> v_tangent_z; // C(W, V^t)
};

template <typename Scalar>
struct LayerForward {
  FeatureStack<Scalar> out;
  LayerCache<Scalar> cache;
};

namespace detail {
template <typename Scalar>
void require_shape(const char* what, const FeatureStack<Scalar>& s, const Shape& expected) {
  if (s.shape() != expected) {
    throw DimensionError(std::string(what) + ": got " + s.shape().str() + ", expected " + expected.str());
  }
}
}  // namespace detail

template <typename Scalar>
LayerForward<Scalar> layer_forward(const LayerSpec<Scalar>& spec, const LayerParams<Scalar>& params,
                                   const FeatureStack<Scalar>& x) {
  detail::require_shape("layer_forward input", x, spec.input_shape());
  detail::require_shape("layer_forward bias", params.b, spec.conv_shape());
  LayerCache<Scalar> cache;
  cache.x = x;
  cache.z = convolve(params.w, x, spec.geometry) + params.b;
  cache.out = pool_avg(apply_S(spec.nl, cache.z), spec.pool);
  auto out = cache.out;
  return {std::move(out), std::move(cache)};
}

// --- first derivatives -----------------------------------------------------

/// Df v = Psi(S'(Z) . C(W, v))
template <typename Scalar>
FeatureStack<Scalar> layer_df_apply(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                    const LayerParams<Scalar>& params, const FeatureStack<Scalar>& v) {
  detail::require_shape("layer_df_apply", v, spec.input_shape());
  return pool_avg(dS_apply(spec.nl, cache.z, convolve(params.w, v, spec.geometry)), spec.pool);
}

/// D^*f e = (W _| C)^* (S'(Z) . Psi^* e)
template <typename Scalar>
FeatureStack<Scalar> layer_df_adjoint(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                      const LayerParams<Scalar>& params, const FeatureStack<Scalar>& e) {
  detail::require_shape("layer_df_adjoint", e, spec.output_shape());
  return convolve_adjoint_wrt_x(params.w, dS_apply(spec.nl, cache.z, pool_avg_adjoint(e, spec.pool)),
                                spec.geometry);
}

/// grad_W f U = Psi(S'(Z) . C(U, X))
template <typename Scalar>
FeatureStack<Scalar> layer_grad_w_apply(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                        const FeatureStack<Scalar>& u) {
  detail::require_shape("layer_grad_w_apply", u, spec.filter_shape());
  return pool_avg(dS_apply(spec.nl, cache.z, convolve(u, spec.mixing, cache.x, spec.geometry)), spec.pool);
}

/// grad_W^* f e = (C _ X)^* (S'(Z) . Psi^* e)
template <typename Scalar>
FeatureStack<Scalar> layer_grad_w_adjoint(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                          const FeatureStack<Scalar>& e) {
  detail::require_shape("layer_grad_w_adjoint", e, spec.output_shape());
  return convolve_adjoint_wrt_w(cache.x, dS_apply(spec.nl, cache.z, pool_avg_adjoint(e, spec.pool)),
                                spec.geometry, spec.mixing);
}

/// grad_B f U = Psi(S'(Z) . U)
template <typename Scalar>
FeatureStack<Scalar> layer_grad_b_apply(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                        const FeatureStack<Scalar>& u) {
  detail::require_shape("layer_grad_b_apply", u, spec.conv_shape());
  return pool_avg(dS_apply(spec.nl, cache.z, u), spec.pool);
}

/// grad_B^* f e = S'(Z) . Psi^* e
template <typename Scalar>
FeatureStack<Scalar> layer_grad_b_adjoint(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                          const FeatureStack<Scalar>& e) {
  detail::require_shape("layer_grad_b_adjoint", e, spec.output_shape());
  return dS_apply(spec.nl, cache.z, pool_avg_adjoint(e, spec.pool));
}

// --- second derivatives ----------------------------------------------------
//
// Each `_apply` is the forward linear map obtained by fixing the tangent V in
// the first slot; each `_adjoint` is its adjoint.

namespace detail {
template <typename Scalar>
FeatureStack<Scalar> tangent_conv(const LayerSpec<Scalar>& spec, const LayerParams<Scalar>& params,
                                  const FeatureStack<Scalar>& v) {
  require_shape("tangent direction", v, spec.input_shape());
  return convolve(params.w, v, spec.geometry);
}
}  // namespace detail

/// (V _| D grad_W f) U = Psi(S''(Z) . C(W,V) . C(U,X)) + Psi(S'(Z) . C(U,V))
template <typename Scalar>
FeatureStack<Scalar> layer_d2_mixed_w_apply(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                            const LayerParams<Scalar>& params, const FeatureStack<Scalar>& v,
                                            const FeatureStack<Scalar>& u) {
  const auto cwv = detail::tangent_conv(spec, params, v);
  detail::require_shape("layer_d2_mixed_w_apply", u, spec.filter_shape());
  const auto cux = convolve(u, spec.mixing, cache.x, spec.geometry);
  const auto cuv = convolve(u, spec.mixing, v, spec.geometry);
  return pool_avg(d2S_apply(spec.nl, cache.z, cwv, cux) + dS_apply(spec.nl, cache.z, cuv), spec.pool);
}

/// (V _| D grad_W f)^* e = (C _ X)^*(S''(Z) . C(W,V) . Psi^* e) + (C _ V)^*(S'(Z) . Psi^* e)
template <typename Scalar>
FeatureStack<Scalar> layer_d2_mixed_w_adjoint(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                              const LayerParams<Scalar>& params, const FeatureStack<Scalar>& v,
                                              const FeatureStack<Scalar>& e) {
  const auto cwv = detail::tangent_conv(spec, params, v);
  detail::require_shape("layer_d2_mixed_w_adjoint", e, spec.output_shape());
  const auto pe = pool_avg_adjoint(e, spec.pool);
  auto out = convolve_adjoint_wrt_w(v, dS_apply(spec.nl, cache.z, pe), spec.geometry, spec.mixing);
  if (!defect_active(Defect::MissingSecondOrderTerm)) {
    out += convolve_adjoint_wrt_w(cache.x, d2S_apply(spec.nl, cache.z, cwv, pe), spec.geometry, spec.mixing);
  }
  return out;
}

/// (V _| D grad_B f) U = Psi(S''(Z) . C(W,V) . U)
template <typename Scalar>
FeatureStack<Scalar> layer_d2_mixed_b_apply(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                            const LayerParams<Scalar>& params, const FeatureStack<Scalar>& v,
                                            const FeatureStack<Scalar>& u) {
  detail::require_shape("layer_d2_mixed_b_apply", u, spec.conv_shape());
  return pool_avg(d2S_apply(spec.nl, cache.z, detail::tangent_conv(spec, params, v), u), spec.pool);
}

/// (V _| D grad_B f)^* e = S''(Z) . C(W,V) . Psi^* e
template <typename Scalar>
FeatureStack<Scalar> layer_d2_mixed_b_adjoint(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                              const LayerParams<Scalar>& params, const FeatureStack<Scalar>& v,
                                              const FeatureStack<Scalar>& e) {
  detail::require_shape("layer_d2_mixed_b_adjoint", e, spec.output_shape());
  return d2S_apply(spec.nl, cache.z, detail::tangent_conv(spec, params, v), pool_avg_adjoint(e, spec.pool));
}

/// (V _| D^2 f) Vt = Psi(S''(Z) . C(W,V) . C(W,Vt))
template <typename Scalar>
FeatureStack<Scalar> layer_d2_xx_apply(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                       const LayerParams<Scalar>& params, const FeatureStack<Scalar>& v,
                                       const FeatureStack<Scalar>& v_other) {
  const auto cwv = detail::tangent_conv(spec, params, v);
  const auto cwo = detail::tangent_conv(spec, params, v_other);
  return pool_avg(d2S_apply(spec.nl, cache.z, cwv, cwo), spec.pool);
}

/// (V _| D^2 f)^* e = (W _| C)^*(S''(Z) . C(W,V) . Psi^* e)
template <typename Scalar>
FeatureStack<Scalar> layer_d2_xx_adjoint(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                         const LayerParams<Scalar>& params, const FeatureStack<Scalar>& v,
                                         const FeatureStack<Scalar>& e) {
  detail::require_shape("layer_d2_xx_adjoint", e, spec.output_shape());
  const auto cwv = detail::tangent_conv(spec, params, v);
  return convolve_adjoint_wrt_x(params.w, d2S_apply(spec.nl, cache.z, cwv, pool_avg_adjoint(e, spec.pool)),
                                spec.geometry);
}

/// grad_W (Df e) U, i.e. the W-derivative of the tangent map taken in the
/// opposite order to `layer_d2_mixed_w_apply`:
/// Psi((S''(Z) . C(U,X)) . C(W,E) + S'(Z) . C(U,E))
template <typename Scalar>
FeatureStack<Scalar> layer_grad_w_df_apply(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                           const LayerParams<Scalar>& params, const FeatureStack<Scalar>& u,
                                           const FeatureStack<Scalar>& e) {
  detail::require_shape("layer_grad_w_df_apply", u, spec.filter_shape());
  const auto dz = convolve(u, spec.mixing, cache.x, spec.geometry);  // grad_W Z . U
  const auto s2 = apply_S2(spec.nl, cache.z);
  const auto ds1 = hadamard(s2, dz);                                  // D(S'(Z)) . U
  const auto cwe = detail::tangent_conv(spec, params, e);
  const auto cue = convolve(u, spec.mixing, e, spec.geometry);
  return pool_avg(hadamard(ds1, cwe) + hadamard(apply_S1(spec.nl, cache.z), cue), spec.pool);
}

/// grad_B (Df e) U = Psi((S''(Z) . U) . C(W,E))
template <typename Scalar>
FeatureStack<Scalar> layer_grad_b_df_apply(const LayerSpec<Scalar>& spec, const LayerCache<Scalar>& cache,
                                           const LayerParams<Scalar>& params, const FeatureStack<Scalar>& u,
                                           const FeatureStack<Scalar>& e) {
  detail::require_shape("layer_grad_b_df_apply", u, spec.conv_shape());
  const auto ds1 = hadamard(apply_S2(spec.nl, cache.z), u);
  return pool_avg(hadamard(ds1, detail::tangent_conv(spec, params, e)), spec.pool);
}

}  // namespace cfcnn
