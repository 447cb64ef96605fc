// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfcnn/adjoint_suite.hpp"
#include "cfcnn/io/dataset.hpp"
#include "cfcnn/testbed.hpp"
#include "cfcnn/training.hpp"
#include "cfcnn/verify.hpp"

using namespace cfcnn;
using Rng = std::mt19937_64;

namespace {

const std::vector<Activation> kSmooth{Activation::Tanh, Activation::Sigmoid};

struct Outcome {
  bool pass = true;
  std::string detail;
};

// --- 1: adjoints -----------------------------------------------------------

Outcome adjoint_suite() {
  verify::AdjointCheckOptions opts;
  opts.trials = 100;
  opts.tol = 1e-10;
  opts.dense_tol = 1e-12;
  Outcome o;
  double worst_id = 0, worst_dense = 0;
  int failed = 0;
  const auto reports = run_adjoint_suite(6, opts);
  for (const auto& r : reports) {
    worst_id = std::max(worst_id, r.identity_err);
    worst_dense = std::max(worst_dense, r.dense_err);
    if (!r.pass()) {
      o.pass = false;
      ++failed;
    }
  }
  std::ostringstream os;
  os << reports.size() << " families, " << failed << " failing, max identity err " << worst_id
     << ", max dense err " << worst_dense;
  o.detail = os.str();
  return o;
}

// --- 2, 3: gradients -------------------------------------------------------

Outcome gradient_check(bool higher_order) {
  Rng rng(higher_order ? 303 : 202);
  Outcome o;
  Index coords = 0, failures = 0;
  double worst_rel = 0;
  for (int i = 0; i < 20; ++i) {
    const auto spec = testbed::random_network(rng, 1 + i % 3, 5, kSmooth);
    const auto state = testbed::random_state(rng, spec);
    const auto sample = testbed::random_sample(rng, spec, higher_order ? testbed::uniform_index(rng, 1, 2) : 0);
    GradientSet<double> analytic, numeric;
    if (higher_order) {
      analytic = grads_higher_order(spec, state, sample);
      numeric = verify::fd_gradient<double>([&](const NetworkState<double>& s) { return loss_R(spec, s, sample); },
                                            state);
    } else {
      analytic = grads_first_order(spec, state, sample);
      numeric = verify::fd_gradient<double>([&](const NetworkState<double>& s) { return loss_J(spec, s, sample); },
                                            state);
    }
    const auto cmp = higher_order ? verify::compare_gradients(analytic, numeric, 1e-5, 1e-7)
                                  : verify::compare_gradients(analytic, numeric, 1e-6, 1e-8);
    coords += cmp.coordinates;
    failures += cmp.failures;
    for (double r : cmp.layer_max_rel) worst_rel = std::max(worst_rel, r);
  }
  o.pass = failures == 0;
  std::ostringstream os;
  os << "20 networks, " << failures << " of " << coords << " coordinates outside tolerance, max rel err "
     << worst_rel;
  o.detail = os.str();
  return o;
}

// --- 4: mixed partials -----------------------------------------------------

Outcome mixed_partials() {
  Rng rng(404);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto spec = testbed::random_layer(rng, 5, kSmooth);
    const auto params = testbed::random_params(rng, spec);
    const auto x = Stack::Random(spec.input_shape(), rng);
    const auto cache = layer_forward(spec, params, x).cache;
    const auto e = Stack::Random(spec.input_shape(), rng);
    const auto uw = Stack::Random(spec.filter_shape(), rng), ub = Stack::Random(spec.conv_shape(), rng);
    const auto dw = layer_d2_mixed_w_apply(spec, cache, params, e, uw) - layer_grad_w_df_apply(spec, cache, params, uw, e);
    const auto db = layer_d2_mixed_b_apply(spec, cache, params, e, ub) - layer_grad_b_df_apply(spec, cache, params, ub, e);
    worst = std::max({worst, dw.coeffs().cwiseAbs().maxCoeff(), db.coeffs().cwiseAbs().maxCoeff()});
  }
  std::ostringstream os;
  os << "100 layers, max difference " << worst;
  return {worst <= 1e-10, os.str()};
}

// --- 5: fully connected vs dense MLP ---------------------------------------

Outcome fully_connected() {
  Rng rng(505);
  double worst_fwd = 0, worst_grad = 0;
  for (int i = 0; i < 20; ++i) {
    const Shape in{testbed::uniform_index(rng, 1, 5), testbed::uniform_index(rng, 1, 5), testbed::uniform_index(rng, 1, 3)};
    const Index hidden = testbed::uniform_index(rng, 1, 5), classes = testbed::uniform_index(rng, 1, 4);
    auto l1 = make_final_layer<double>(in, hidden, Nonlinearity{kSmooth[i % 2]});
    l1.is_final = false;
    l1.mixing = testbed::random_mixing(rng, in.depth, hidden);
    auto l2 = make_final_layer<double>(l1.output_shape(), classes, Nonlinearity{kSmooth[(i + 1) % 2]});
    const NetworkSpec<double> spec({l1, l2});
    const auto state = testbed::random_state(rng, spec);
    const auto sample = testbed::random_sample(rng, spec);
    const auto mlp = verify::fc_network_to_mlp(spec, state);
    const Vec1D dense_out = verify::dense_mlp_oracle(mlp, sample.x.coeffs());
    worst_fwd = std::max(worst_fwd, (forward(spec, state, sample.x).output - dense_out).cwiseAbs().maxCoeff());
    const auto g = grads_first_order(spec, state, sample);
    const auto d = verify::mlp_gradients_to_network(spec, state, verify::dense_mlp_gradients(mlp, sample.x.coeffs(), sample.y));
    for (std::size_t t = 0; t < g.dW.size(); ++t) {
      worst_grad = std::max(worst_grad, (g.dW[t].coeffs() - d.dW[t].coeffs()).cwiseAbs().maxCoeff());
      worst_grad = std::max(worst_grad, (g.dB[t].coeffs() - d.dB[t].coeffs()).cwiseAbs().maxCoeff());
    }
  }
  std::ostringstream os;
  os << "20 networks, forward max err " << worst_fwd << ", gradient max err " << worst_grad;
  return {worst_fwd <= 1e-12 && worst_grad <= 1e-10, os.str()};
}

// --- 6: tangent forward ----------------------------------------------------

Outcome tangent_forward() {
  Rng rng(606);
  double worst = 0;
  bool pass = true;
  for (int i = 0; i < 20; ++i) {
    const auto spec = testbed::random_network(rng, 1 + i % 3, 5, {Activation::Tanh});
    const auto state = testbed::random_state(rng, spec);
    const auto x = Stack::Random(spec.input_shape(), rng), v = Stack::Random(spec.input_shape(), rng);
    const Vec1D analytic = *forward_tangent(spec, state, x, v).tangent_out;
    const Vec1D fd = depth_vector(verify::fd_directional<double>(
        [&](const Stack& p) { return from_depth_vector(forward(spec, state, p).output); }, x, v));
    for (Index c = 0; c < analytic.size(); ++c) {
      const double err = std::abs(analytic[c] - fd[c]);
      const double rel = err / std::max({std::abs(analytic[c]), std::abs(fd[c]), 1e-8});
      if (std::abs(analytic[c]) < 1e-6) {
        if (err > 1e-8 && rel > 1e-6) pass = false;
      } else {
        worst = std::max(worst, rel);
        if (rel > 1e-6) pass = false;
      }
    }
  }
  std::ostringstream os;
  os << "20 tanh networks, max rel err " << worst;
  return {pass, os.str()};
}

// --- 7: training -----------------------------------------------------------

Outcome training() {
  auto data = io::make_blob_dataset(7, 40, 6, 6);
  const auto l1 = make_layer<double>(ConvGeometry(6, 6, 3, 3, 1), 1, 2, Nonlinearity{Activation::Tanh}, 2);
  const auto l2 = make_final_layer<double>(l1.output_shape(), 2, Nonlinearity{Activation::Tanh});
  const NetworkSpec<double> spec({l1, l2});
  TrainConfig cfg;
  cfg.eta = 0.01;
  cfg.iterations = 50;

  auto run = [&](double lambda) {
    cfg.lambda = lambda;
    std::vector<CurvePoint> curve;
    train(spec, init_params(spec, 3, 0.1), data.samples, cfg, TrainMode::Single,
          [&](const CurvePoint& p) { curve.push_back(p); });
    return curve;
  };
  const auto plain = run(0.0);
  io::attach_tangents(data, io::translation_tangents(data));
  const auto penalised = run(0.1);
  std::ostringstream os;
  os << "J " << plain.front().J << " -> " << plain.back().J << ", J+0.1R " << penalised.front().total << " -> "
     << penalised.back().total;
  return {plain.back().J < plain.front().J && penalised.back().total < penalised.front().total, os.str()};
}

// --- 8: mutations ----------------------------------------------------------

Outcome mutations() {
  Outcome o;
  std::ostringstream os;
  for (Defect d : {Defect::PoolAdjointUnscaled, Defect::CropOffByOne, Defect::TangentErrorsSwapped,
                   Defect::MissingSecondOrderTerm, Defect::StrideMisapplied}) {
    const ScopedDefect guard(d);
    std::string caught;
    if (!adjoint_suite().pass) caught = "1";
    else if (!gradient_check(false).pass) caught = "2";
    else if (!gradient_check(true).pass) caught = "3";
    if (caught.empty()) o.pass = false;
    os << "\n    " << defect_name(d) << ": " << (caught.empty() ? "not detected" : "criterion " + caught + " fails");
  }
  o.detail = "5 defects" + os.str();
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"adjoint identities", adjoint_suite},
      {"first-order gradient vs finite differences", [] { return gradient_check(false); }},
      {"tangent-penalty gradient vs finite differences", [] { return gradient_check(true); }},
      {"mixed partials", mixed_partials},
      {"fully connected network vs dense MLP", fully_connected},
      {"tangent forward vs finite differences", tangent_forward},
      {"training decreases loss", training},
      {"mutation sensitivity", mutations},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu: %s (%.2f s)\n  %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, secs,
                o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
