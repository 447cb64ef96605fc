#pragma once

// Seeded generators for random layers, networks and samples, used by the
// check commands and the test suites.

#include <algorithm>
#include <random>
#include <vector>

#include "cfcnn/feature_stack.hpp"
#include "cfcnn/layer.hpp"
#include "cfcnn/network.hpp"
#include "cfcnn/operators.hpp"
#include "cfcnn/training.hpp"

namespace cfcnn::testbed {

template <typename Rng>
Index uniform_index(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

template <typename Rng>
Vec1D random_vec(Rng& rng, Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec1D v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

template <typename Rng>
Nonlinearity random_nonlinearity(Rng& rng, const std::vector<Activation>& choices) {
  return Nonlinearity{choices[static_cast<std::size_t>(uniform_index(rng, 0, static_cast<Index>(choices.size()) - 1))]};
}

/// Random mixing: all-ones or uniform on [-1, 1], with even odds.
template <typename Rng>
std::vector<Vec1D> random_mixing(Rng& rng, Index in_depth, Index out_depth) {
  if (uniform_index(rng, 0, 1) == 0) return full_mixing<double>(in_depth, out_depth);
  std::vector<Vec1D> m;
  for (Index a = 0; a < out_depth; ++a) m.push_back(random_vec(rng, in_depth));
  return m;
}

/// Convolutional (non-final) layer on an input of the given shape, with a
/// random filter size, stride in [1, max_stride] and a pooling factor that
/// divides the convolution output.
template <typename Rng>
LayerSpec<double> random_conv_layer(Rng& rng, const Shape& input, Index out_depth, Nonlinearity nl,
                                    Index max_stride = 3) {
  const Index p = uniform_index(rng, 1, input.rows);
  const Index q = uniform_index(rng, 1, input.cols);
  const Index stride = uniform_index(rng, 1, max_stride);
  const ConvGeometry g(input.rows, input.cols, p, q, stride);
  std::vector<Index> divisors;
  for (Index r = 1; r <= std::min(g.out_rows(), g.out_cols()); ++r) {
    if (g.out_rows() % r == 0 && g.out_cols() % r == 0) divisors.push_back(r);
  }
  const Index pool = divisors[static_cast<std::size_t>(uniform_index(rng, 0, static_cast<Index>(divisors.size()) - 1))];
  return make_layer<double>(g, input.depth, out_depth, nl, pool, false, random_mixing(rng, input.depth, out_depth));
}

template <typename Rng>
LayerSpec<double> random_layer(Rng& rng, Index max_dim, const std::vector<Activation>& activations) {
  const Shape input{uniform_index(rng, 1, max_dim), uniform_index(rng, 1, max_dim), uniform_index(rng, 1, max_dim)};
  return random_conv_layer(rng, input, uniform_index(rng, 1, max_dim), random_nonlinearity(rng, activations));
}

/// L-layer network: L-1 random convolutional layers and a fully connected
/// final layer onto N classes. All spatial dims and depths are <= max_dim.
template <typename Rng>
NetworkSpec<double> random_network(Rng& rng, Index layers, Index max_dim, const std::vector<Activation>& activations) {
  Shape shape{uniform_index(rng, 1, max_dim), uniform_index(rng, 1, max_dim), uniform_index(rng, 1, max_dim)};
  std::vector<LayerSpec<double>> specs;
  for (Index t = 1; t < layers; ++t) {
    specs.push_back(random_conv_layer(rng, shape, uniform_index(rng, 1, max_dim), random_nonlinearity(rng, activations)));
    shape = specs.back().output_shape();
  }
  auto final_layer = make_final_layer<double>(shape, uniform_index(rng, 1, max_dim), random_nonlinearity(rng, activations));
  final_layer.mixing = random_mixing(rng, shape.depth, final_layer.out_depth);
  specs.push_back(std::move(final_layer));
  return NetworkSpec<double>(std::move(specs));
}

/// Filters and biases uniform on [-scale, scale], mixing from the spec.
template <typename Rng>
NetworkState<double> random_state(Rng& rng, const NetworkSpec<double>& spec, double scale = 1.0) {
  NetworkState<double> state = zero_state(spec);
  for (auto& p : state.params) {
    p.w.filters = Stack::Random(p.w.filters.shape(), rng, -scale, scale);
    p.b = Stack::Random(p.b.shape(), rng, -scale, scale);
  }
  return state;
}

template <typename Rng>
LayerParams<double> random_params(Rng& rng, const LayerSpec<double>& spec, double scale = 1.0) {
  LayerParams<double> p = zero_params(spec);
  p.w.filters = Stack::Random(spec.filter_shape(), rng, -scale, scale);
  p.b = Stack::Random(spec.conv_shape(), rng, -scale, scale);
  return p;
}

template <typename Rng>
Sample<double> random_sample(Rng& rng, const NetworkSpec<double>& spec, Index tangent_count = 0) {
  Sample<double> s{Stack::Random(spec.input_shape(), rng), random_vec(rng, spec.classes()), {}};
  for (Index i = 0; i < tangent_count; ++i) {
    s.tangents.push_back({Stack::Random(spec.input_shape(), rng), random_vec(rng, spec.classes())});
  }
  return s;
}

}  // namespace cfcnn::testbed
