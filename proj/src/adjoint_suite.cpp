#include "cfcnn/adjoint_suite.hpp"

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>

#include "cfcnn/layer.hpp"
#include "cfcnn/network.hpp"
#include "cfcnn/operators.hpp"
#include "cfcnn/testbed.hpp"

namespace cfcnn {
namespace {

using Rng = std::mt19937_64;
using Instance = verify::AdjointInstance<double>;
using Factory = std::function<Instance(Rng&, Index)>;

using testbed::random_vec;
using testbed::uniform_index;

const std::vector<Activation> kAllActivations{Activation::Tanh, Activation::Sigmoid, Activation::Relu};
const std::vector<Activation> kSmoothActivations{Activation::Tanh, Activation::Sigmoid};

Shape random_shape(Rng& rng, Index max_dim) {
  return {uniform_index(rng, 1, max_dim), uniform_index(rng, 1, max_dim), uniform_index(rng, 1, max_dim)};
}

Instance crop_embed(Rng& rng, Index max_dim) {
  const Shape in = random_shape(rng, max_dim);
  const Index p = uniform_index(rng, 1, in.rows), q = uniform_index(rng, 1, in.cols);
  const Index j = uniform_index(rng, 1, in.rows - p + 1), k = uniform_index(rng, 1, in.cols - q + 1);
  return {[=](const Stack& x) { return crop(x, j, k, p, q); },
          [=](const Stack& y) { return embed(y, j, k, in.rows, in.cols); }, in, Shape{p, q, in.depth}};
}

Instance mixing(Rng& rng, Index max_dim) {
  const Shape in = random_shape(rng, max_dim);
  const Vec1D v = random_vec(rng, in.depth);
  return {[=](const Stack& u) { return mix(v, u); }, [=](const Stack& y) { return mix_adjoint(v, y); }, in,
          Shape{in.rows, in.cols, 1}};
}

struct ConvDraw {
  ConvGeometry g;
  Index in_depth, out_depth;
  std::vector<Vec1D> mixing;
};

ConvDraw random_conv(Rng& rng, Index max_dim) {
  const Shape in = random_shape(rng, max_dim);
  const Index p = uniform_index(rng, 1, in.rows), q = uniform_index(rng, 1, in.cols);
  const ConvGeometry g(in.rows, in.cols, p, q, uniform_index(rng, 1, 3));
  const Index out_depth = uniform_index(rng, 1, max_dim);
  return {g, in.depth, out_depth, testbed::random_mixing(rng, in.depth, out_depth)};
}

Instance conv_wrt_w(Rng& rng, Index max_dim) {
  auto d = random_conv(rng, max_dim);
  const Stack x = Stack::Random({d.g.in_rows(), d.g.in_cols(), d.in_depth}, rng);
  return {[=](const Stack& u) { return convolve(u, d.mixing, x, d.g); },
          [=](const Stack& y) { return convolve_adjoint_wrt_w(x, y, d.g, d.mixing); },
          Shape{d.g.filter_rows(), d.g.filter_cols(), d.out_depth}, Shape{d.g.out_rows(), d.g.out_cols(), d.out_depth}};
}

Instance conv_wrt_x(Rng& rng, Index max_dim) {
  auto d = random_conv(rng, max_dim);
  const FilterBank<double> w{Stack::Random({d.g.filter_rows(), d.g.filter_cols(), d.out_depth}, rng), d.mixing};
  return {[=](const Stack& x) { return convolve(w, x, d.g); },
          [=](const Stack& z) { return convolve_adjoint_wrt_x(w, z, d.g); },
          Shape{d.g.in_rows(), d.g.in_cols(), d.in_depth}, Shape{d.g.out_rows(), d.g.out_cols(), d.out_depth}};
}

Instance pooling(Rng& rng, Index max_dim) {
  const Index r = uniform_index(rng, 1, std::min<Index>(3, max_dim));
  const Shape out{uniform_index(rng, 1, max_dim / r), uniform_index(rng, 1, max_dim / r), uniform_index(rng, 1, max_dim)};
  return {[=](const Stack& y) { return pool_avg(y, r); }, [=](const Stack& z) { return pool_avg_adjoint(z, r); },
          Shape{out.rows * r, out.cols * r, out.depth}, out};
}

Instance ds(Rng& rng, Index max_dim) {
  const Shape s = random_shape(rng, max_dim);
  const Stack z = Stack::Random(s, rng, -2.0, 2.0);
  const Nonlinearity nl = testbed::random_nonlinearity(rng, kAllActivations);
  auto op = [=](const Stack& v) { return dS_apply(nl, z, v); };
  return {op, op, s, s};
}

Instance d2s(Rng& rng, Index max_dim) {
  const Shape s = random_shape(rng, max_dim);
  const Stack z = Stack::Random(s, rng, -2.0, 2.0);
  const Stack v = Stack::Random(s, rng);
  const Nonlinearity nl = testbed::random_nonlinearity(rng, kSmoothActivations);
  auto op = [=](const Stack& w) { return d2S_apply(nl, z, v, w); };
  return {op, op, s, s};
}

struct LayerDraw {
  LayerSpec<double> spec;
  LayerParams<double> params;
  LayerCache<double> cache;
  Stack v;
};

std::shared_ptr<const LayerDraw> random_layer_draw(Rng& rng, Index max_dim, const std::vector<Activation>& acts) {
  auto spec = testbed::random_layer(rng, max_dim, acts);
  auto params = testbed::random_params(rng, spec);
  auto fwd = layer_forward(spec, params, Stack::Random(spec.input_shape(), rng));
  Stack v = Stack::Random(spec.input_shape(), rng);
  return std::make_shared<const LayerDraw>(LayerDraw{std::move(spec), std::move(params), std::move(fwd.cache), std::move(v)});
}

Instance layer_df(Rng& rng, Index max_dim) {
  auto d = random_layer_draw(rng, max_dim, kAllActivations);
  return {[d](const Stack& v) { return layer_df_apply(d->spec, d->cache, d->params, v); },
          [d](const Stack& e) { return layer_df_adjoint(d->spec, d->cache, d->params, e); }, d->spec.input_shape(),
          d->spec.output_shape()};
}

Instance layer_grad_w(Rng& rng, Index max_dim) {
  auto d = random_layer_draw(rng, max_dim, kAllActivations);
  return {[d](const Stack& u) { return layer_grad_w_apply(d->spec, d->cache, u); },
          [d](const Stack& e) { return layer_grad_w_adjoint(d->spec, d->cache, e); }, d->spec.filter_shape(),
          d->spec.output_shape()};
}

Instance layer_grad_b(Rng& rng, Index max_dim) {
  auto d = random_layer_draw(rng, max_dim, kAllActivations);
  return {[d](const Stack& u) { return layer_grad_b_apply(d->spec, d->cache, u); },
          [d](const Stack& e) { return layer_grad_b_adjoint(d->spec, d->cache, e); }, d->spec.conv_shape(),
          d->spec.output_shape()};
}

Instance layer_d2_mixed_w(Rng& rng, Index max_dim) {
  auto d = random_layer_draw(rng, max_dim, kSmoothActivations);
  return {[d](const Stack& u) { return layer_d2_mixed_w_apply(d->spec, d->cache, d->params, d->v, u); },
          [d](const Stack& e) { return layer_d2_mixed_w_adjoint(d->spec, d->cache, d->params, d->v, e); },
          d->spec.filter_shape(), d->spec.output_shape()};
}

Instance layer_d2_mixed_b(Rng& rng, Index max_dim) {
  auto d = random_layer_draw(rng, max_dim, kSmoothActivations);
  return {[d](const Stack& u) { return layer_d2_mixed_b_apply(d->spec, d->cache, d->params, d->v, u); },
          [d](const Stack& e) { return layer_d2_mixed_b_adjoint(d->spec, d->cache, d->params, d->v, e); },
          d->spec.conv_shape(), d->spec.output_shape()};
}

Instance layer_d2_xx(Rng& rng, Index max_dim) {
  auto d = random_layer_draw(rng, max_dim, kSmoothActivations);
  return {[d](const Stack& u) { return layer_d2_xx_apply(d->spec, d->cache, d->params, d->v, u); },
          [d](const Stack& e) { return layer_d2_xx_adjoint(d->spec, d->cache, d->params, d->v, e); },
          d->spec.input_shape(), d->spec.output_shape()};
}

struct NetworkDraw {
  NetworkSpec<double> spec;
  NetworkState<double> state;
  ForwardTrace<double> trace;
  Index t;
};

Instance network_omega(Rng& rng, Index max_dim) {
  auto spec = testbed::random_network(rng, uniform_index(rng, 1, 3), max_dim, kAllActivations);
  auto state = testbed::random_state(rng, spec);
  auto trace = forward(spec, state, Stack::Random(spec.input_shape(), rng));
  const Index t = uniform_index(rng, 1, spec.depth() + 1);
  const Shape in = t <= spec.depth() ? spec.layer(t).input_shape() : Shape{1, 1, spec.classes()};
  const Shape out{1, 1, spec.classes()};
  auto d = std::make_shared<const NetworkDraw>(NetworkDraw{std::move(spec), std::move(state), std::move(trace), t});
  return {[d](const Stack& u) { return from_depth_vector(omega_apply(d->spec, d->state, d->trace, d->t, u)); },
          [d](const Stack& e) { return omega_adjoint_apply(d->spec, d->state, d->trace, d->t, depth_vector(e)); }, in,
          out};
}

const std::vector<std::pair<std::string, Factory>>& families() {
  static const std::vector<std::pair<std::string, Factory>> list{
      {"crop-embed", crop_embed},
      {"mix", mixing},
      {"convolve-wrt-w", conv_wrt_w},
      {"convolve-wrt-x", conv_wrt_x},
      {"pool-avg", pooling},
      {"dS", ds},
      {"d2S", d2s},
      {"layer-df", layer_df},
      {"layer-grad-w", layer_grad_w},
      {"layer-grad-b", layer_grad_b},
      {"layer-d2-mixed-w", layer_d2_mixed_w},
      {"layer-d2-mixed-b", layer_d2_mixed_b},
      {"layer-d2-xx", layer_d2_xx},
      {"network-omega", network_omega},
  };
  return list;
}

verify::AdjointReport run_one(std::size_t index, Index max_dim, const verify::AdjointCheckOptions& opts) {
  const auto& [name, factory] = families()[index];
  verify::AdjointCheckOptions local = opts;
  local.seed = opts.seed + index;
  return verify::check_adjoint_family<double>(name, [&](Rng& rng) { return factory(rng, max_dim); }, local);
}

}  // namespace

const std::vector<std::string>& adjoint_family_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : families()) out.push_back(f.first);
    return out;
  }();
  return names;
}

std::vector<verify::AdjointReport> run_adjoint_suite(Index max_dim, const verify::AdjointCheckOptions& opts) {
  if (max_dim < 1) throw std::invalid_argument("adjoint suite: max_dim must be at least 1");
  std::vector<verify::AdjointReport> reports;
  for (std::size_t i = 0; i < families().size(); ++i) reports.push_back(run_one(i, max_dim, opts));
  return reports;
}

verify::AdjointReport run_adjoint_family(const std::string& family, Index max_dim,
                                         const verify::AdjointCheckOptions& opts) {
  if (max_dim < 1) throw std::invalid_argument("adjoint suite: max_dim must be at least 1");
  for (std::size_t i = 0; i < families().size(); ++i) {
    if (families()[i].first == family) return run_one(i, max_dim, opts);
  }
  throw std::invalid_argument("unknown adjoint family '" + family + "'");
}

}  // namespace cfcnn
