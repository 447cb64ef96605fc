#pragma once

// Independent oracles: dense materialisation of linear maps, central finite
// differences and a plain-loop dense MLP. Nothing here calls the operator or
// layer kernels; only FeatureStack storage is shared.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfcnn/errors.hpp"
#include "cfcnn/feature_stack.hpp"
#include "cfcnn/network.hpp"
#include "cfcnn/training.hpp"

namespace cfcnn::verify {

inline constexpr std::uint64_t kDefaultSeed = 20240601;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using LinearMap = std::function<FeatureStack<Scalar>(const FeatureStack<Scalar>&)>;

/// Coordinate matrix of a linear map between stack spaces, columns indexed
/// by the canonical slice-major flattening of the input.
template <typename Scalar>
struct DenseOperator {
  Matrix<Scalar> entries;

  Index out_dim() const { return entries.rows(); }
  Index in_dim() const { return entries.cols(); }
};

template <typename Scalar>
DenseOperator<Scalar> materialize(const LinearMap<Scalar>& op, const Shape& in_shape, const Shape& out_shape) {
  DenseOperator<Scalar> dense{Matrix<Scalar>::Zero(out_shape.size(), in_shape.size())};
  FeatureStack<Scalar> basis(in_shape);
  for (Index c = 0; c < in_shape.size(); ++c) {
    basis.coeffs()[c] = Scalar(1);
    const FeatureStack<Scalar> column = op(basis);
    if (column.shape() != out_shape) {
      throw DimensionError("materialize: operator produced " + column.shape().str() + ", expected " +
                           out_shape.str());
    }
    dense.entries.col(c) = column.coeffs();
    basis.coeffs()[c] = Scalar(0);
  }
  return dense;
}

// ---------------------------------------------------------------------------
// Adjoint checks
// ---------------------------------------------------------------------------

struct AdjointReport {
  std::string name;
  double identity_err = 0.0;  // max |<y, L x> - <L* y, x>|
  double dense_err = 0.0;     // max |L*_dense - L_dense^T|
  double tol = 1e-10;
  double dense_tol = 1e-12;
  Index trials = 0;
  std::uint64_t seed = kDefaultSeed;

  bool identity_pass() const { return identity_err <= tol; }
  bool dense_pass() const { return dense_err <= dense_tol; }
  bool pass() const { return identity_pass() && dense_pass(); }

  void merge(const AdjointReport& other) {
    identity_err = std::max(identity_err, other.identity_err);
    dense_err = std::max(dense_err, other.dense_err);
    trials += other.trials;
  }
};

/// `CHECK <name> <max_err> <tol> <PASS|FAIL>` lines, one for the inner-product
/// identity and one for the dense transpose comparison.
inline std::string check_lines(const AdjointReport& r) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific;
  os << "CHECK " << r.name << "/identity " << r.identity_err << ' ' << r.tol << ' '
     << (r.identity_pass() ? "PASS" : "FAIL") << '\n';
  os << "CHECK " << r.name << "/dense " << r.dense_err << ' ' << r.dense_tol << ' '
     << (r.dense_pass() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

inline std::string render_text(const AdjointReport& r) {
  std::ostringstream os;
  os << r.name << ": " << (r.pass() ? "pass" : "FAIL") << " (" << r.trials << " trials, seed " << r.seed
     << ")\n  inner-product identity max err " << r.identity_err << " (tol " << r.tol << ")\n"
     << "  dense transpose max err " << r.dense_err << " (tol " << r.dense_tol << ")\n";
  return os.str();
}

struct AdjointCheckOptions {
  Index trials = 100;
  double tol = 1e-10;
  double dense_tol = 1e-12;
  std::uint64_t seed = kDefaultSeed;
  bool dense = true;
};

namespace detail {

template <typename Scalar>
double dense_transpose_error(const LinearMap<Scalar>& fwd, const LinearMap<Scalar>& adj, const Shape& in_shape,
                             const Shape& out_shape) {
  const auto F = materialize(fwd, in_shape, out_shape);
  const auto A = materialize(adj, out_shape, in_shape);
  return static_cast<double>((A.entries - F.entries.transpose()).cwiseAbs().maxCoeff());
}

template <typename Scalar, typename Rng>
double identity_error(const LinearMap<Scalar>& fwd, const LinearMap<Scalar>& adj, const Shape& in_shape,
                      const Shape& out_shape, Rng& rng) {
  const auto x = FeatureStack<Scalar>::Random(in_shape, rng);
  const auto y = FeatureStack<Scalar>::Random(out_shape, rng);
  using std::abs;
  return static_cast<double>(abs(inner(y, fwd(x)) - inner(adj(y), x)));
}

}  // namespace detail

/// Checks a fixed (fwd, adj) pair on `opts.trials` seeded random (x, y) plus
/// one dense comparison.
template <typename Scalar>
AdjointReport check_adjoint_pair(const std::string& name, const LinearMap<Scalar>& fwd, const LinearMap<Scalar>& adj,
                                 const Shape& in_shape, const Shape& out_shape, const AdjointCheckOptions& opts = {}) {
  AdjointReport r{name, 0.0, 0.0, opts.tol, opts.dense_tol, opts.trials, opts.seed};
  std::mt19937_64 rng(opts.seed);
  for (Index i = 0; i < opts.trials; ++i) {
    r.identity_err = std::max(r.identity_err, detail::identity_error(fwd, adj, in_shape, out_shape, rng));
  }
  if (opts.dense) r.dense_err = detail::dense_transpose_error(fwd, adj, in_shape, out_shape);
  return r;
}

/// One randomly drawn operator instance of a family.
template <typename Scalar>
struct AdjointInstance {
  LinearMap<Scalar> fwd;
  LinearMap<Scalar> adj;
  Shape in_shape;
  Shape out_shape;
};

/// Draws `opts.trials` instances from `factory(rng)`; each gets one random
/// inner-product trial and a dense comparison.
template <typename Scalar, typename Factory>
AdjointReport check_adjoint_family(const std::string& name, Factory&& factory, const AdjointCheckOptions& opts = {}) {
  AdjointReport r{name, 0.0, 0.0, opts.tol, opts.dense_tol, 0, opts.seed};
  std::mt19937_64 rng(opts.seed);
  for (Index i = 0; i < opts.trials; ++i) {
    const AdjointInstance<Scalar> inst = factory(rng);
    r.identity_err =
        std::max(r.identity_err, detail::identity_error(inst.fwd, inst.adj, inst.in_shape, inst.out_shape, rng));
    if (opts.dense) {
      r.dense_err =
          std::max(r.dense_err, detail::dense_transpose_error(inst.fwd, inst.adj, inst.in_shape, inst.out_shape));
    }
    ++r.trials;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

inline constexpr double kFdStep = 1e-5;

/// Central differences of `loss` in every W and B coordinate.
template <typename Scalar>
GradientSet<Scalar> fd_gradient(const std::function<Scalar(const NetworkState<Scalar>&)>& loss,
                                const NetworkState<Scalar>& state, Scalar h = Scalar(kFdStep)) {
  if (!(h > Scalar(0))) throw std::invalid_argument("fd_gradient: step must be positive");
  GradientSet<Scalar> g;
  NetworkState<Scalar> probe = state;
  auto diff = [&](Scalar& coord) {
    const Scalar saved = coord;
    coord = saved + h;
    const Scalar plus = loss(probe);
    coord = saved - h;
    const Scalar minus = loss(probe);
    coord = saved;
    return (plus - minus) / (Scalar(2) * h);
  };
  for (auto& p : probe.params) {
    FeatureStack<Scalar> dW(p.w.filters.shape());
    for (Index c = 0; c < dW.size(); ++c) dW.coeffs()[c] = diff(p.w.filters.coeffs()[c]);
    FeatureStack<Scalar> dB(p.b.shape());
    for (Index c = 0; c < dB.size(); ++c) dB.coeffs()[c] = diff(p.b.coeffs()[c]);
    g.dW.push_back(std::move(dW));
    g.dB.push_back(std::move(dB));
  }
  return g;
}

/// Central difference of a stack-valued map along direction v.
template <typename Scalar>
FeatureStack<Scalar> fd_directional(const LinearMap<Scalar>& f, const FeatureStack<Scalar>& x,
                                    const FeatureStack<Scalar>& v, Scalar h = Scalar(kFdStep)) {
  auto out = f(axpy(h, v, x)) - f(axpy(-h, v, x));
  out *= Scalar(1) / (Scalar(2) * h);
  return out;
}

struct GradientComparison {
  std::vector<double> layer_max_rel;  // per layer, over coordinates judged relatively
  std::vector<double> layer_max_abs;  // per layer, over near-zero coordinates
  Index coordinates = 0;
  Index failures = 0;
  bool pass() const { return failures == 0; }
};

/// A coordinate passes if |a - n| <= abs_tol + rel_tol * max(|a|, |n|).
/// The absolute part absorbs the rounding floor of central differences,
/// about eps * loss / h, which dominates for small coordinates.
/// Reported max_rel covers |a| >= near_zero, max_abs the rest.
template <typename Scalar>
GradientComparison compare_gradients(const GradientSet<Scalar>& analytic, const GradientSet<Scalar>& numeric,
                                     double rel_tol, double abs_tol, double near_zero = 1e-6) {
  if (analytic.dW.size() != numeric.dW.size()) throw DimensionError("compare_gradients: layer count mismatch");
  GradientComparison cmp;
  auto visit = [&](const FeatureStack<Scalar>& a, const FeatureStack<Scalar>& n, double& max_rel, double& max_abs) {
    FeatureStack<Scalar>::require_same_shape(a, n, "compare_gradients");
    for (Index c = 0; c < a.size(); ++c) {
      const double av = static_cast<double>(a.coeffs()[c]);
      const double nv = static_cast<double>(n.coeffs()[c]);
      const double err = std::abs(av - nv);
      const double rel = err / std::max({std::abs(av), std::abs(nv), 1e-8});
      ++cmp.coordinates;
      if (std::abs(av) < near_zero) max_abs = std::max(max_abs, err);
      else max_rel = std::max(max_rel, rel);
      if (err > abs_tol + rel_tol * std::max(std::abs(av), std::abs(nv))) ++cmp.failures;
    }
  };
  for (std::size_t t = 0; t < analytic.dW.size(); ++t) {
    double max_rel = 0.0, max_abs = 0.0;
    visit(analytic.dW[t], numeric.dW[t], max_rel, max_abs);
    visit(analytic.dB[t], numeric.dB[t], max_rel, max_abs);
    cmp.layer_max_rel.push_back(max_rel);
    cmp.layer_max_abs.push_back(max_abs);
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// Dense MLP oracle
// ---------------------------------------------------------------------------

/// Activation evaluated with its own formulas, not Nonlinearity's.
inline double mlp_activation(Activation a, double x) {
  switch (a) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Relu: return std::max(0.0, x);
    case Activation::Identity: return x;
  }
  return x;
}

inline double mlp_activation_slope(Activation a, double x) {
  switch (a) {
    case Activation::Tanh: {
      const double c = std::cosh(x);
      return 1.0 / (c * c);
    }
    case Activation::Sigmoid: {
      const double e = std::exp(-x);
      return e / ((1.0 + e) * (1.0 + e));
    }
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
  }
  return 0.0;
}

struct DenseMlp {
  std::vector<Eigen::MatrixXd> weights;  // layer t: out_t x in_t
  std::vector<Eigen::VectorXd> biases;
  std::vector<Activation> activations;

  void validate(Index input_dim) const {
    if (weights.size() != biases.size() || weights.size() != activations.size() || weights.empty()) {
      throw DimensionError("DenseMlp: inconsistent layer lists");
    }
    Index dim = input_dim;
    for (std::size_t t = 0; t < weights.size(); ++t) {
      if (weights[t].cols() != dim || biases[t].size() != weights[t].rows()) {
        throw DimensionError("DenseMlp: layer " + std::to_string(t + 1) + " shape mismatch");
      }
      dim = weights[t].rows();
    }
  }
};

/// sigma(W x + b) per layer, in plain loops.
inline Eigen::VectorXd dense_mlp_oracle(const DenseMlp& mlp, const Eigen::VectorXd& x) {
  mlp.validate(x.size());
  std::vector<double> a(x.data(), x.data() + x.size());
  for (std::size_t t = 0; t < mlp.weights.size(); ++t) {
    const auto& W = mlp.weights[t];
    std::vector<double> next(static_cast<std::size_t>(W.rows()));
    for (Index r = 0; r < W.rows(); ++r) {
      double acc = mlp.biases[t][r];
      for (Index c = 0; c < W.cols(); ++c) acc += W(r, c) * a[static_cast<std::size_t>(c)];
      next[static_cast<std::size_t>(r)] = mlp_activation(mlp.activations[t], acc);
    }
    a = std::move(next);
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Index>(a.size()));
}

struct DenseMlpGradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
};

/// Textbook backprop of 1/2 |mlp(x) - y|^2, in plain loops.
inline DenseMlpGradients dense_mlp_gradients(const DenseMlp& mlp, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  mlp.validate(x.size());
  const std::size_t L = mlp.weights.size();
  std::vector<std::vector<double>> acts{std::vector<double>(x.data(), x.data() + x.size())};
  std::vector<std::vector<double>> pre;
  for (std::size_t t = 0; t < L; ++t) {
    const auto& W = mlp.weights[t];
    std::vector<double> z(static_cast<std::size_t>(W.rows())), a(z.size());
    for (Index r = 0; r < W.rows(); ++r) {
      double acc = mlp.biases[t][r];
      for (Index c = 0; c < W.cols(); ++c) acc += W(r, c) * acts.back()[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = acc;
      a[static_cast<std::size_t>(r)] = mlp_activation(mlp.activations[t], acc);
    }
    pre.push_back(std::move(z));
    acts.push_back(std::move(a));
  }
  if (y.size() != static_cast<Index>(acts.back().size())) throw DimensionError("dense_mlp_gradients: target dim");

  DenseMlpGradients g;
  g.dW.resize(L);
  g.db.resize(L);
  std::vector<double> delta(acts.back().size());
  for (std::size_t r = 0; r < delta.size(); ++r) delta[r] = acts.back()[r] - y[static_cast<Index>(r)];
  for (std::size_t t = L; t-- > 0;) {
    const auto& W = mlp.weights[t];
    std::vector<double> local(delta.size());
    for (std::size_t r = 0; r < delta.size(); ++r) local[r] = delta[r] * mlp_activation_slope(mlp.activations[t], pre[t][r]);
    g.db[t] = Eigen::VectorXd(W.rows());
    g.dW[t] = Eigen::MatrixXd(W.rows(), W.cols());
    for (Index r = 0; r < W.rows(); ++r) {
      g.db[t][r] = local[static_cast<std::size_t>(r)];
      for (Index c = 0; c < W.cols(); ++c) g.dW[t](r, c) = local[static_cast<std::size_t>(r)] * acts[t][static_cast<std::size_t>(c)];
    }
    std::vector<double> back(static_cast<std::size_t>(W.cols()), 0.0);
    for (Index c = 0; c < W.cols(); ++c)
      for (Index r = 0; r < W.rows(); ++r) back[static_cast<std::size_t>(c)] += W(r, c) * local[static_cast<std::size_t>(r)];
    delta = std::move(back);
  }
  return g;
}

/// True when every layer is fully connected (window = whole input, stride 1,
/// no pooling), so that the network is a dense MLP.
inline bool is_fully_connected(const NetworkSpec<double>& spec) {
  for (const auto& l : spec.layers()) {
    const auto& g = l.geometry;
    if (g.filter_rows() != g.in_rows() || g.filter_cols() != g.in_cols() || g.stride() != 1 || l.pool != 1) {
      return false;
    }
  }
  return true;
}

/// Dense weights of a fully connected network: M[a, flat(j,k,i)] = A_a[i] W_a(j,k),
/// columns in slice-major input order.
inline DenseMlp fc_network_to_mlp(const NetworkSpec<double>& spec, const NetworkState<double>& state) {
  if (!is_fully_connected(spec)) throw ConfigError("fc_network_to_mlp: network is not fully connected");
  DenseMlp mlp;
  for (Index t = 1; t <= spec.depth(); ++t) {
    const auto& l = spec.layer(t);
    const auto& p = state.layer(t);
    const Index n = l.geometry.in_rows(), m = l.geometry.in_cols();
    Eigen::MatrixXd M(l.out_depth, n * m * l.in_depth);
    for (Index a = 1; a <= l.out_depth; ++a)
      for (Index i = 1; i <= l.in_depth; ++i)
        for (Index j = 1; j <= n; ++j)
          for (Index k = 1; k <= m; ++k)
            M(a - 1, (i - 1) * n * m + (j - 1) * m + (k - 1)) = p.w.mixing[a - 1][i - 1] * p.w.filters(j, k, a);
    mlp.weights.push_back(std::move(M));
    mlp.biases.push_back(p.b.coeffs());
    mlp.activations.push_back(l.nl.kind);
  }
  return mlp;
}

/// Pulls dense-MLP gradients back onto the filter parametrisation:
/// dW_a(j,k) = sum_i A_a[i] dM[a, flat(j,k,i)].
inline GradientSet<double> mlp_gradients_to_network(const NetworkSpec<double>& spec, const NetworkState<double>& state,
                                                    const DenseMlpGradients& dense) {
  GradientSet<double> g;
  for (Index t = 1; t <= spec.depth(); ++t) {
    const auto& l = spec.layer(t);
    const auto& p = state.layer(t);
    const Index n = l.geometry.in_rows(), m = l.geometry.in_cols();
    const auto& dM = dense.dW[static_cast<std::size_t>(t - 1)];
    FeatureStack<double> dW(l.filter_shape());
    for (Index a = 1; a <= l.out_depth; ++a)
      for (Index i = 1; i <= l.in_depth; ++i)
        for (Index j = 1; j <= n; ++j)
          for (Index k = 1; k <= m; ++k)
            dW(j, k, a) += p.w.mixing[a - 1][i - 1] * dM(a - 1, (i - 1) * n * m + (j - 1) * m + (k - 1));
    g.dW.push_back(std::move(dW));
    g.dB.push_back(FeatureStack<double>(l.conv_shape(), dense.db[static_cast<std::size_t>(t - 1)]));
  }
  return g;
}

}  // namespace cfcnn::verify
