#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "cfcnn/defects.hpp"
#include "cfcnn/errors.hpp"
#include "cfcnn/feature_stack.hpp"

namespace cfcnn {

// ---------------------------------------------------------------------------
// Cropping, embedding and mixing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string window_str(Index j, Index k, Index p, Index q) {
  return "(j=" + std::to_string(j) + ", k=" + std::to_string(k) + ", p=" + std::to_string(p) +
         ", q=" + std::to_string(q) + ")";
}

inline void require_window(const char* what, Index j, Index k, Index p, Index q, Index rows, Index cols) {
  if (p <= 0 || q <= 0 || j < 1 || k < 1 || j + p - 1 > rows || k + q - 1 > cols) {
    throw RangeError(std::string(what) + ": window " + window_str(j, k, p, q) + " does not fit in " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

/// target[window at (j,k)] += scale * y, slice by slice.
template <typename Scalar>
void accumulate_window(FeatureStack<Scalar>& target, const FeatureStack<Scalar>& y, Index j, Index k,
                       Scalar scale) {
  for (Index i = 1; i <= y.depth(); ++i) {
    target.slice(i).block(j - 1, k - 1, y.rows(), y.cols()) += scale * y.slice(i);
  }
}

}  // namespace detail

/// K_{jk}: the p x q window with top-left corner (j, k) of every slice.
template <typename Scalar>
FeatureStack<Scalar> crop(const FeatureStack<Scalar>& x, Index j, Index k, Index p, Index q) {
  detail::require_window("crop", j, k, p, q, x.rows(), x.cols());
  FeatureStack<Scalar> out(p, q, x.depth());
  if (defect_active(Defect::CropOffByOne)) {
    for (Index i = 1; i <= x.depth(); ++i)
      for (Index r = 1; r <= p; ++r)
        for (Index s = 1; s <= q; ++s) out(r, s, i) = x(j + r - 1, (k + s - 1) % x.cols() + 1, i);
    return out;
  }
  for (Index i = 1; i <= x.depth(); ++i) {
    out.slice(i) = x.slice(i).block(j - 1, k - 1, p, q);
  }
  return out;
}

/// Em_{jk}: places y into an n x l zero matrix at (j, k), slice by slice.
/// This is the adjoint of crop at the same window.
template <typename Scalar>
FeatureStack<Scalar> embed(const FeatureStack<Scalar>& y, Index j, Index k, Index rows, Index cols) {
  detail::require_window("embed", j, k, y.rows(), y.cols(), rows, cols);
  FeatureStack<Scalar> out(rows, cols, y.depth());
  detail::accumulate_window(out, y, j, k, Scalar(1));
  return out;
}

/// Phi_v: weighted sum of the slices of u.
template <typename Scalar>
FeatureStack<Scalar> mix(const Vec<Scalar>& v, const FeatureStack<Scalar>& u) {
  if (v.size() != u.depth()) {
    throw DimensionError("mix: vector of dim " + std::to_string(v.size()) + " cannot mix stack " +
                         u.shape().str());
  }
  FeatureStack<Scalar> out(u.rows(), u.cols(), 1);
  for (Index i = 1; i <= u.depth(); ++i) out.slice(1) += v[i - 1] * u.slice(i);
  return out;
}

/// Phi_v^* Y = Y (x) v.
template <typename Scalar>
FeatureStack<Scalar> mix_adjoint(const Vec<Scalar>& v, const FeatureStack<Scalar>& y) {
  if (y.depth() != 1) throw DimensionError("mix_adjoint: expected a single slice, got " + y.shape().str());
  FeatureStack<Scalar> out(y.rows(), y.cols(), v.size());
  for (Index i = 1; i <= v.size(); ++i) out.slice(i) = v[i - 1] * y.slice(1);
  return out;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Input/filter/stride geometry of a valid (unpadded) strided convolution.
/// Output dims are the largest counts whose windows stay inside the input.
class ConvGeometry {
 public:
  ConvGeometry() = default;

  ConvGeometry(Index in_rows, Index in_cols, Index filter_rows, Index filter_cols, Index stride)
      : in_rows_(in_rows), in_cols_(in_cols), p_(filter_rows), q_(filter_cols), stride_(stride) {
    if (in_rows <= 0 || in_cols <= 0 || filter_rows <= 0 || filter_cols <= 0 || stride <= 0) {
      throw GeometryError("ConvGeometry: all sizes and the stride must be positive");
    }
    if (filter_rows > in_rows || filter_cols > in_cols) {
      throw GeometryError("ConvGeometry: filter " + std::to_string(filter_rows) + "x" +
                          std::to_string(filter_cols) + " larger than input " + std::to_string(in_rows) +
                          "x" + std::to_string(in_cols));
    }
    out_rows_ = (in_rows - filter_rows) / stride + 1;
    out_cols_ = (in_cols - filter_cols) / stride + 1;
  }

  Index in_rows() const { return in_rows_; }
  Index in_cols() const { return in_cols_; }
  Index filter_rows() const { return p_; }
  Index filter_cols() const { return q_; }
  Index stride() const { return stride_; }
  Index out_rows() const { return out_rows_; }
  Index out_cols() const { return out_cols_; }

  /// Top-left corner of the window feeding output entry (j, k).
  Index window_row(Index j) const { return 1 + (j - 1) * stride_; }
  Index window_col(Index k) const { return 1 + (k - 1) * stride_; }

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;

 private:
  Index in_rows_ = 0, in_cols_ = 0, p_ = 0, q_ = 0, stride_ = 1;
  Index out_rows_ = 0, out_cols_ = 0;
};

/// Filters W = sum_a W_a (x) e_a together with the fixed mixing vectors A_a.
template <typename Scalar>
struct FilterBank {
  FeatureStack<Scalar> filters;        // p x q x m2
  std::vector<Vec<Scalar>> mixing;     // m2 vectors in R^{m1}

  Index out_depth() const { return filters.depth(); }
  Index in_depth() const { return mixing.empty() ? 0 : mixing.front().size(); }

  void validate() const {
    if (static_cast<Index>(mixing.size()) != filters.depth()) {
      throw DimensionError("FilterBank: " + std::to_string(mixing.size()) + " mixing vectors for " +
                           std::to_string(filters.depth()) + " filters");
    }
    for (const auto& a : mixing) {
      if (a.size() != in_depth()) throw DimensionError("FilterBank: mixing vectors differ in dimension");
    }
  }
};

/// m2 copies of the all-ones vector in R^{m1} (full mixing).
template <typename Scalar>
std::vector<Vec<Scalar>> full_mixing(Index in_depth, Index out_depth) {
  return std::vector<Vec<Scalar>>(static_cast<std::size_t>(out_depth), Vec<Scalar>::Ones(in_depth));
}

namespace detail {

inline void require_conv_input(const char* what, const ConvGeometry& g, const Shape& x) {
  if (x.rows != g.in_rows() || x.cols != g.in_cols()) {
    throw DimensionError(std::string(what) + ": input " + x.str() + " does not match geometry " +
                         std::to_string(g.in_rows()) + "x" + std::to_string(g.in_cols()));
  }
}

inline void require_conv_output(const char* what, const ConvGeometry& g, const Shape& y, Index depth) {
  if (y.rows != g.out_rows() || y.cols != g.out_cols() || y.depth != depth) {
    throw DimensionError(std::string(what) + ": output-space argument " + y.str() + " expected " +
                         std::to_string(g.out_rows()) + "x" + std::to_string(g.out_cols()) + "x" +
                         std::to_string(depth));
  }
}

inline void require_filters(const char* what, const ConvGeometry& g, const Shape& w) {
  if (w.rows != g.filter_rows() || w.cols != g.filter_cols()) {
    throw DimensionError(std::string(what) + ": filters " + w.str() + " do not match geometry " +
                         std::to_string(g.filter_rows()) + "x" + std::to_string(g.filter_cols()));
  }
}

template <typename Scalar>
void require_mixing(const char* what, const std::vector<Vec<Scalar>>& mixing, Index out_depth, Index in_depth) {
  if (static_cast<Index>(mixing.size()) != out_depth) {
    throw DimensionError(std::string(what) + ": need " + std::to_string(out_depth) + " mixing vectors, got " +
                         std::to_string(mixing.size()));
  }
  for (const auto& a : mixing) {
    if (a.size() != in_depth) {
      throw DimensionError(std::string(what) + ": mixing vector of dim " + std::to_string(a.size()) +
                           " for input depth " + std::to_string(in_depth));
    }
  }
}

inline Index conv_col_origin(const ConvGeometry& g, Index k) {
  return defect_active(Defect::StrideMisapplied) ? k : g.window_col(k);
}

}  // namespace detail

/// C(W, X): output slice a, entry (j, k) is <W_a, Phi_{A_a}(K_{window(j,k)}(X))>.
/// Cross-correlation, no kernel flip, no padding.
template <typename Scalar>
FeatureStack<Scalar> convolve(const FeatureStack<Scalar>& filters, const std::vector<Vec<Scalar>>& mixing,
                              const FeatureStack<Scalar>& x, const ConvGeometry& g) {
  detail::require_conv_input("convolve", g, x.shape());
  detail::require_filters("convolve", g, filters.shape());
  detail::require_mixing("convolve", mixing, filters.depth(), x.depth());
  const Index p = g.filter_rows(), q = g.filter_cols();
  FeatureStack<Scalar> out(g.out_rows(), g.out_cols(), filters.depth());
  for (Index a = 1; a <= filters.depth(); ++a) {
    const auto& weights = mixing[a - 1];
    for (Index j = 1; j <= g.out_rows(); ++j) {
      for (Index k = 1; k <= g.out_cols(); ++k) {
        const auto window = crop(x, g.window_row(j), detail::conv_col_origin(g, k), p, q);
        const auto mixed = mix(weights, window);
        out(j, k, a) = (filters.slice(a).array() * mixed.slice(1).array()).sum();
      }
    }
  }
  return out;
}

template <typename Scalar>
FeatureStack<Scalar> convolve(const FilterBank<Scalar>& w, const FeatureStack<Scalar>& x, const ConvGeometry& g) {
  return convolve(w.filters, w.mixing, x, g);
}

/// (C _ X)^* Y: slice a is sum_{jk} Y_a(j,k) Phi_{A_a}(K_{window(j,k)}(X)).
template <typename Scalar>
FeatureStack<Scalar> convolve_adjoint_wrt_w(const FeatureStack<Scalar>& x, const FeatureStack<Scalar>& y,
                                            const ConvGeometry& g, const std::vector<Vec<Scalar>>& mixing) {
  detail::require_conv_input("convolve_adjoint_wrt_w", g, x.shape());
  const Index out_depth = static_cast<Index>(mixing.size());
  detail::require_conv_output("convolve_adjoint_wrt_w", g, y.shape(), out_depth);
  detail::require_mixing("convolve_adjoint_wrt_w", mixing, out_depth, x.depth());
  const Index p = g.filter_rows(), q = g.filter_cols();
  FeatureStack<Scalar> out(p, q, out_depth);
  for (Index a = 1; a <= out_depth; ++a) {
    for (Index j = 1; j <= g.out_rows(); ++j) {
      for (Index k = 1; k <= g.out_cols(); ++k) {
        const Scalar weight = y(j, k, a);
        const auto mixed = mix(mixing[a - 1], crop(x, g.window_row(j), g.window_col(k), p, q));
        out.slice(a) += weight * mixed.slice(1);
      }
    }
  }
  return out;
}

/// (W _| C)^* Z = sum_a sum_{jk} Z_a(j,k) K^*_{window(j,k)} Phi^*_{A_a} W_a.
/// Accumulates with a outermost, then (j, k) row-major.
template <typename Scalar>
FeatureStack<Scalar> convolve_adjoint_wrt_x(const FilterBank<Scalar>& w, const FeatureStack<Scalar>& z,
                                            const ConvGeometry& g) {
  detail::require_filters("convolve_adjoint_wrt_x", g, w.filters.shape());
  detail::require_conv_output("convolve_adjoint_wrt_x", g, z.shape(), w.out_depth());
  detail::require_mixing("convolve_adjoint_wrt_x", w.mixing, w.out_depth(), w.in_depth());
  FeatureStack<Scalar> out(g.in_rows(), g.in_cols(), w.in_depth());
  for (Index a = 1; a <= w.out_depth(); ++a) {
    const auto lifted = mix_adjoint(w.mixing[a - 1], FeatureStack<Scalar>::FromMatrix(w.filters.slice(a)));
    for (Index j = 1; j <= g.out_rows(); ++j) {
      for (Index k = 1; k <= g.out_cols(); ++k) {
        detail::accumulate_window(out, lifted, g.window_row(j), g.window_col(k), z(j, k, a));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearity
// ---------------------------------------------------------------------------

enum class Activation { Tanh, Sigmoid, Relu, Identity };

/// Scalar activation with its first and second derivatives. `Identity` is a
/// test hook (sigma' = 1) and is not accepted by the config parser.
/// Relu uses sigma'(0) = 0 and sigma'' = 0 everywhere.
struct Nonlinearity {
  Activation kind = Activation::Tanh;

  template <typename Scalar>
  Scalar value(Scalar x) const {
    using std::exp;
    using std::tanh;
    switch (kind) {
      case Activation::Tanh: return tanh(x);
      case Activation::Sigmoid: return Scalar(1) / (Scalar(1) + exp(-x));
      case Activation::Relu: return x > Scalar(0) ? x : Scalar(0);
      case Activation::Identity: return x;
    }
    return x;
  }

  template <typename Scalar>
  Scalar first(Scalar x) const {
    switch (kind) {
      case Activation::Tanh: {
        const Scalar t = value(x);
        return Scalar(1) - t * t;
      }
      case Activation::Sigmoid: {
        const Scalar s = value(x);
        return s * (Scalar(1) - s);
      }
      case Activation::Relu: return x > Scalar(0) ? Scalar(1) : Scalar(0);
      case Activation::Identity: return Scalar(1);
    }
    return Scalar(0);
  }

  template <typename Scalar>
  Scalar second(Scalar x) const {
    switch (kind) {
      case Activation::Tanh: {
        const Scalar t = value(x);
        return Scalar(-2) * t * (Scalar(1) - t * t);
      }
      case Activation::Sigmoid: {
        const Scalar s = value(x);
        return s * (Scalar(1) - s) * (Scalar(1) - Scalar(2) * s);
      }
      case Activation::Relu:
      case Activation::Identity: return Scalar(0);
    }
    return Scalar(0);
  }

  bool smooth() const { return kind != Activation::Relu; }

  friend bool operator==(const Nonlinearity&, const Nonlinearity&) = default;
};

inline std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "unknown";
}

template <typename Scalar>
FeatureStack<Scalar> apply_S(const Nonlinearity& nl, const FeatureStack<Scalar>& z) {
  FeatureStack<Scalar> out = z;
  for (auto& v : out.coeffs()) v = nl.value(v);
  return out;
}

template <typename Scalar>
FeatureStack<Scalar> apply_S1(const Nonlinearity& nl, const FeatureStack<Scalar>& z) {
  FeatureStack<Scalar> out = z;
  for (auto& v : out.coeffs()) v = nl.first(v);
  return out;
}

template <typename Scalar>
FeatureStack<Scalar> apply_S2(const Nonlinearity& nl, const FeatureStack<Scalar>& z) {
  FeatureStack<Scalar> out = z;
  for (auto& v : out.coeffs()) v = nl.second(v);
  return out;
}

/// DS(z) v = S'(z) . v  (self-adjoint in v)
template <typename Scalar>
FeatureStack<Scalar> dS_apply(const Nonlinearity& nl, const FeatureStack<Scalar>& z, const FeatureStack<Scalar>& v) {
  return hadamard(apply_S1(nl, z), v);
}

/// D^2 S(z)(v, w) = S''(z) . v . w
template <typename Scalar>
FeatureStack<Scalar> d2S_apply(const Nonlinearity& nl, const FeatureStack<Scalar>& z, const FeatureStack<Scalar>& v,
                               const FeatureStack<Scalar>& w) {
  return hadamard(hadamard(apply_S2(nl, z), v), w);
}

// ---------------------------------------------------------------------------
// Average pooling over disjoint r x r blocks
// ---------------------------------------------------------------------------

namespace detail {
inline void require_pool(const char* what, const Shape& s, Index r) {
  if (r <= 0 || s.rows % r != 0 || s.cols % r != 0) {
    throw GeometryError(std::string(what) + ": pooling factor " + std::to_string(r) + " does not divide " +
                        std::to_string(s.rows) + "x" + std::to_string(s.cols));
  }
}
}  // namespace detail

template <typename Scalar>
FeatureStack<Scalar> pool_avg(const FeatureStack<Scalar>& y, Index r) {
  detail::require_pool("pool_avg", y.shape(), r);
  FeatureStack<Scalar> out(y.rows() / r, y.cols() / r, y.depth());
  const Scalar scale = Scalar(1) / Scalar(r * r);
  for (Index a = 1; a <= y.depth(); ++a) {
    for (Index j = 1; j <= out.rows(); ++j) {
      for (Index k = 1; k <= out.cols(); ++k) {
        out(j, k, a) = scale * y.slice(a).block((j - 1) * r, (k - 1) * r, r, r).sum();
      }
    }
  }
  return out;
}

/// Psi^* z: each z(j,k)/r^2 broadcast over its r x r block.
template <typename Scalar>
FeatureStack<Scalar> pool_avg_adjoint(const FeatureStack<Scalar>& z, Index r) {
  if (r <= 0) throw GeometryError("pool_avg_adjoint: pooling factor must be positive");
  FeatureStack<Scalar> out(z.rows() * r, z.cols() * r, z.depth());
  const Scalar scale = defect_active(Defect::PoolAdjointUnscaled) ? Scalar(1) : Scalar(1) / Scalar(r * r);
  for (Index a = 1; a <= z.depth(); ++a) {
    for (Index j = 1; j <= z.rows(); ++j) {
      for (Index k = 1; k <= z.cols(); ++k) {
        out.slice(a).block((j - 1) * r, (k - 1) * r, r, r).setConstant(scale * z(j, k, a));
      }
    }
  }
  return out;
}

}  // namespace cfcnn
