#include "cfcnn/layer.hpp"

#include "cfcnn/testbed.hpp"
#include "cfcnn/verify.hpp"
#include "support.hpp"

using namespace cfcnn;
using namespace cfcnn::test;

namespace {

const std::vector<Activation> kSmooth{Activation::Tanh, Activation::Sigmoid};
constexpr double kH = 1e-5;

struct Draw {
  LayerSpec<double> spec;
  LayerParams<double> params;
  Stack x;
  LayerCache<double> cache;
};

Draw draw(Rng& rng, Index max_dim = 5, const std::vector<Activation>& acts = kSmooth) {
  auto spec = testbed::random_layer(rng, max_dim, acts);
  auto params = testbed::random_params(rng, spec);
  auto x = Stack::Random(spec.input_shape(), rng);
  auto cache = layer_forward(spec, params, x).cache;
  return {std::move(spec), std::move(params), std::move(x), std::move(cache)};
}

Stack out_of(const LayerSpec<double>& spec, const LayerParams<double>& params, const Stack& x) {
  return layer_forward(spec, params, x).out;
}

LayerParams<double> shifted_w(LayerParams<double> p, double h, const Stack& u) {
  p.w.filters = axpy(h, u, p.w.filters);
  return p;
}

LayerParams<double> shifted_b(LayerParams<double> p, double h, const Stack& u) {
  p.b = axpy(h, u, p.b);
  return p;
}

}  // namespace

TEST(LayerForward, ZeroParametersGiveZero) {
  const auto spec = make_layer<double>(ConvGeometry(4, 4, 3, 3, 1), 2, 3, Nonlinearity{Activation::Tanh}, 2);
  Rng rng(40);
  EXPECT_EQ(layer_forward(spec, zero_params(spec), Stack::Random(spec.input_shape(), rng)).out, Stack(1, 1, 3));
}

TEST(LayerForward, PointwiseLayerIsElementwiseTanh) {
  const auto spec = make_layer<double>(ConvGeometry(3, 2, 1, 1, 1), 1, 1, Nonlinearity{Activation::Tanh});
  auto params = zero_params(spec);
  params.w.filters(1, 1, 1) = 1.0;
  const auto x = matrix({{-1, 0.5}, {2, -3}, {0.1, 0}});
  const auto out = layer_forward(spec, params, x).out;
  for (Index j = 1; j <= 3; ++j)
    for (Index k = 1; k <= 2; ++k) EXPECT_DOUBLE_EQ(out(j, k, 1), std::tanh(x(j, k, 1)));
}

TEST(LayerForward, FinalLayerPerClassFormula) {
  Rng rng(41);
  const auto spec = make_final_layer<double>({3, 2, 2}, 4, Nonlinearity{Activation::Sigmoid});
  const auto params = testbed::random_params(rng, spec);
  const auto x = Stack::Random(spec.input_shape(), rng);
  const auto out = layer_forward(spec, params, x).out;
  ASSERT_EQ(out.shape(), (Shape{1, 1, 4}));
  for (Index a = 1; a <= 4; ++a) {
    double acc = params.b(1, 1, a);
    for (Index i = 1; i <= 2; ++i) acc += (params.w.filters.slice(a).array() * x.slice(i).array()).sum();
    EXPECT_NEAR(out(1, 1, a), 1.0 / (1.0 + std::exp(-acc)), 1e-15);
  }
}

TEST(LayerForward, CacheIsRecomputable) {
  Rng rng(42);
  const auto d = draw(rng);
  EXPECT_EQ(d.cache.z, convolve(d.params.w, d.x, d.spec.geometry) + d.params.b);
  EXPECT_EQ(d.cache.x, d.x);
}

TEST(LayerForward, InputShapeChecked) {
  const auto spec = make_layer<double>(ConvGeometry(4, 4, 2, 2, 1), 1, 1, Nonlinearity{Activation::Tanh});
  EXPECT_THROW(layer_forward(spec, zero_params(spec), Stack(4, 4, 2)), DimensionError);
}

TEST(LayerSpec, PoolMustDivide) {
  EXPECT_THROW(make_layer<double>(ConvGeometry(4, 4, 2, 2, 1), 1, 1, Nonlinearity{Activation::Tanh}, 2),
               GeometryError);
}

TEST(LayerSpec, FinalLayerMustBeFullyConnected) {
  EXPECT_THROW(make_layer<double>(ConvGeometry(4, 4, 2, 2, 1), 1, 1, Nonlinearity{Activation::Tanh}, 1, true),
               ConfigError);
}

TEST(LayerSpec, DefaultMixingIsAllOnes) {
  const auto spec = make_layer<double>(ConvGeometry(3, 3, 2, 2, 1), 3, 2, Nonlinearity{Activation::Tanh});
  ASSERT_EQ(spec.mixing.size(), 2u);
  EXPECT_EQ(spec.mixing[1], Vec1D::Ones(3));
}

// --- first derivatives -----------------------------------------------------

TEST(LayerDf, ZeroDirection) {
  Rng rng(43);
  const auto d = draw(rng);
  EXPECT_EQ(layer_df_apply(d.spec, d.cache, d.params, Stack(d.spec.input_shape())), Stack(d.spec.output_shape()));
  EXPECT_EQ(layer_df_adjoint(d.spec, d.cache, d.params, Stack(d.spec.output_shape())), Stack(d.spec.input_shape()));
}

TEST(LayerDf, MatchesCentralDifference) {
  Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = draw(rng);
    const auto v = Stack::Random(d.x.shape(), rng);
    const auto fd = verify::fd_directional<double>([&](const Stack& x) { return out_of(d.spec, d.params, x); }, d.x, v);
    EXPECT_LE(max_rel_diff(fd, layer_df_apply(d.spec, d.cache, d.params, v), 1e-6), 1e-6);
  }
}

TEST(LayerDf, IdentityHookIsPooledConvolution) {
  Rng rng(45);
  const auto spec = make_layer<double>(ConvGeometry(5, 5, 2, 2, 1), 2, 2, Nonlinearity{Activation::Identity}, 2);
  const auto params = testbed::random_params(rng, spec);
  const auto cache = layer_forward(spec, params, Stack::Random(spec.input_shape(), rng)).cache;
  const auto v = Stack::Random(spec.input_shape(), rng);
  EXPECT_EQ(layer_df_apply(spec, cache, params, v), pool_avg(convolve(params.w, v, spec.geometry), 2));
  const auto e = Stack::Random(spec.output_shape(), rng);
  EXPECT_EQ(layer_grad_b_adjoint(spec, cache, e), pool_avg_adjoint(e, 2));
}

TEST(LayerDf, AdjointIdentityAndDenseTranspose) {
  Rng rng(46);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = draw(rng, 4);
    verify::AdjointCheckOptions opts;
    opts.trials = 5;
    const auto r = verify::check_adjoint_pair<double>(
        "df", [&](const Stack& v) { return layer_df_apply(d.spec, d.cache, d.params, v); },
        [&](const Stack& e) { return layer_df_adjoint(d.spec, d.cache, d.params, e); }, d.spec.input_shape(),
        d.spec.output_shape(), opts);
    EXPECT_TRUE(r.pass()) << verify::render_text(r);
  }
}

TEST(LayerGradW, ZeroErrorGivesZero) {
  Rng rng(47);
  const auto d = draw(rng);
  EXPECT_EQ(layer_grad_w_adjoint(d.spec, d.cache, Stack(d.spec.output_shape())), Stack(d.spec.filter_shape()));
  EXPECT_EQ(layer_grad_b_adjoint(d.spec, d.cache, Stack(d.spec.output_shape())), Stack(d.spec.conv_shape()));
}

TEST(LayerGradW, AdjointOfForwardForm) {
  Rng rng(48);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = draw(rng);
    const auto u = Stack::Random(d.spec.filter_shape(), rng), e = Stack::Random(d.spec.output_shape(), rng);
    EXPECT_NEAR(inner(e, layer_grad_w_apply(d.spec, d.cache, u)), inner(layer_grad_w_adjoint(d.spec, d.cache, e), u),
                1e-12);
  }
}

TEST(LayerGradW, MatchesFdJacobianTransposeProduct) {
  Rng rng(49);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = draw(rng);
    const auto e = Stack::Random(d.spec.output_shape(), rng);
    const auto analytic = layer_grad_w_adjoint(d.spec, d.cache, e);
    Stack numeric(d.spec.filter_shape());
    for (Index c = 0; c < numeric.size(); ++c) {
      Stack u(d.spec.filter_shape());
      u.coeffs()[c] = 1.0;
      const auto diff = out_of(d.spec, shifted_w(d.params, kH, u), d.x) - out_of(d.spec, shifted_w(d.params, -kH, u), d.x);
      numeric.coeffs()[c] = inner(e, diff) / (2 * kH);
    }
    EXPECT_LE(max_rel_diff(analytic, numeric, 1e-6), 1e-6);
  }
}

TEST(LayerGradB, MatchesFdJacobianTransposeProduct) {
  Rng rng(50);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = draw(rng);
    const auto e = Stack::Random(d.spec.output_shape(), rng);
    const auto analytic = layer_grad_b_adjoint(d.spec, d.cache, e);
    Stack numeric(d.spec.conv_shape());
    for (Index c = 0; c < numeric.size(); ++c) {
      Stack u(d.spec.conv_shape());
      u.coeffs()[c] = 1.0;
      const auto diff = out_of(d.spec, shifted_b(d.params, kH, u), d.x) - out_of(d.spec, shifted_b(d.params, -kH, u), d.x);
      numeric.coeffs()[c] = inner(e, diff) / (2 * kH);
    }
    EXPECT_LE(max_rel_diff(analytic, numeric, 1e-6), 1e-6);
  }
}

// --- second derivatives ----------------------------------------------------

TEST(LayerD2, ZeroTangentGivesZero) {
  Rng rng(51);
  const auto d = draw(rng);
  const Stack v(d.spec.input_shape());
  const auto e = Stack::Random(d.spec.output_shape(), rng);
  EXPECT_EQ(layer_d2_mixed_w_adjoint(d.spec, d.cache, d.params, v, e), Stack(d.spec.filter_shape()));
  EXPECT_EQ(layer_d2_mixed_b_adjoint(d.spec, d.cache, d.params, v, e), Stack(d.spec.conv_shape()));
  EXPECT_EQ(layer_d2_xx_adjoint(d.spec, d.cache, d.params, v, e), Stack(d.spec.input_shape()));
}

TEST(LayerD2, ReluDropsSecondOrderTerms) {
  Rng rng(52);
  const auto d = draw(rng, 5, {Activation::Relu});
  const auto v = Stack::Random(d.spec.input_shape(), rng), e = Stack::Random(d.spec.output_shape(), rng);
  const auto pe = pool_avg_adjoint(e, d.spec.pool);
  EXPECT_LE(max_abs_diff(layer_d2_mixed_w_adjoint(d.spec, d.cache, d.params, v, e),
                         convolve_adjoint_wrt_w(v, dS_apply(d.spec.nl, d.cache.z, pe), d.spec.geometry, d.spec.mixing)),
            1e-14);
  EXPECT_EQ(layer_d2_mixed_b_adjoint(d.spec, d.cache, d.params, v, e), Stack(d.spec.conv_shape()));
}

TEST(LayerD2, AdjointsOfForwardForms) {
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = draw(rng);
    const auto v = Stack::Random(d.spec.input_shape(), rng), e = Stack::Random(d.spec.output_shape(), rng);
    const auto uw = Stack::Random(d.spec.filter_shape(), rng), ub = Stack::Random(d.spec.conv_shape(), rng);
    const auto ux = Stack::Random(d.spec.input_shape(), rng);
    EXPECT_NEAR(inner(e, layer_d2_mixed_w_apply(d.spec, d.cache, d.params, v, uw)),
                inner(layer_d2_mixed_w_adjoint(d.spec, d.cache, d.params, v, e), uw), 1e-11);
    EXPECT_NEAR(inner(e, layer_d2_mixed_b_apply(d.spec, d.cache, d.params, v, ub)),
                inner(layer_d2_mixed_b_adjoint(d.spec, d.cache, d.params, v, e), ub), 1e-11);
    EXPECT_NEAR(inner(e, layer_d2_xx_apply(d.spec, d.cache, d.params, v, ux)),
                inner(layer_d2_xx_adjoint(d.spec, d.cache, d.params, v, e), ux), 1e-11);
  }
}

TEST(LayerD2, MixedWMatchesFdOfTangentMap) {
  // (V _| D grad_W f) U is the W-derivative of the tangent map Df(X) V.
  Rng rng(54);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = draw(rng);
    const auto v = Stack::Random(d.spec.input_shape(), rng), u = Stack::Random(d.spec.filter_shape(), rng);
    auto tangent = [&](const LayerParams<double>& p) {
      const auto c = layer_forward(d.spec, p, d.x).cache;
      return layer_df_apply(d.spec, c, p, v);
    };
    const auto fd = (tangent(shifted_w(d.params, kH, u)) - tangent(shifted_w(d.params, -kH, u))) * (1.0 / (2 * kH));
    EXPECT_LE(max_rel_diff(fd, layer_d2_mixed_w_apply(d.spec, d.cache, d.params, v, u), 1e-5), 1e-6);
  }
}

TEST(LayerD2, MixedBMatchesFdOfTangentMap) {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = draw(rng);
    const auto v = Stack::Random(d.spec.input_shape(), rng), u = Stack::Random(d.spec.conv_shape(), rng);
    auto tangent = [&](const LayerParams<double>& p) {
      const auto c = layer_forward(d.spec, p, d.x).cache;
      return layer_df_apply(d.spec, c, p, v);
    };
    const auto fd = (tangent(shifted_b(d.params, kH, u)) - tangent(shifted_b(d.params, -kH, u))) * (1.0 / (2 * kH));
    EXPECT_LE(max_rel_diff(fd, layer_d2_mixed_b_apply(d.spec, d.cache, d.params, v, u), 1e-5), 1e-6);
  }
}

TEST(LayerD2, XXMatchesSecondDifference) {
  Rng rng(56);
  const double h = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = draw(rng);
    const auto v = Stack::Random(d.spec.input_shape(), rng);
    const auto f0 = out_of(d.spec, d.params, d.x);
    const auto fd = (out_of(d.spec, d.params, axpy(h, v, d.x)) - 2.0 * f0 + out_of(d.spec, d.params, axpy(-h, v, d.x))) *
                    (1.0 / (h * h));
    EXPECT_LE(max_rel_diff(fd, layer_d2_xx_apply(d.spec, d.cache, d.params, v, v), 1e-3), 1e-4);
  }
}

TEST(LayerD2, SecondDerivativeIsSymmetric) {
  Rng rng(57);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = draw(rng);
    const auto v = Stack::Random(d.spec.input_shape(), rng), w = Stack::Random(d.spec.input_shape(), rng);
    const auto e = Stack::Random(d.spec.output_shape(), rng);
    EXPECT_NEAR(inner(e, layer_d2_xx_apply(d.spec, d.cache, d.params, v, w)),
                inner(e, layer_d2_xx_apply(d.spec, d.cache, d.params, w, v)), 1e-13);
  }
}

TEST(LayerD2, MixedPartialsAgreeInBothOrders) {
  Rng rng(58);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = draw(rng);
    const auto e = Stack::Random(d.spec.input_shape(), rng);
    const auto uw = Stack::Random(d.spec.filter_shape(), rng), ub = Stack::Random(d.spec.conv_shape(), rng);
    EXPECT_LE(max_abs_diff(layer_d2_mixed_w_apply(d.spec, d.cache, d.params, e, uw),
                           layer_grad_w_df_apply(d.spec, d.cache, d.params, uw, e)),
              1e-10);
    EXPECT_LE(max_abs_diff(layer_d2_mixed_b_apply(d.spec, d.cache, d.params, e, ub),
                           layer_grad_b_df_apply(d.spec, d.cache, d.params, ub, e)),
              1e-10);
  }
}

TEST(LayerD2, MissingSecondOrderDefectChangesMixedW) {
  Rng rng(59);
  const auto d = draw(rng);
  const auto v = Stack::Random(d.spec.input_shape(), rng), e = Stack::Random(d.spec.output_shape(), rng);
  const auto clean = layer_d2_mixed_w_adjoint(d.spec, d.cache, d.params, v, e);
  const ScopedDefect guard(Defect::MissingSecondOrderTerm);
  EXPECT_GT(max_abs_diff(clean, layer_d2_mixed_w_adjoint(d.spec, d.cache, d.params, v, e)), 1e-8);
}
