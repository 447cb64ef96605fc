#include "cfcnn/commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "cfcnn/adjoint_suite.hpp"
#include "cfcnn/io/config.hpp"
#include "cfcnn/io/dataset.hpp"
#include "cfcnn/testbed.hpp"
#include "cfcnn/training.hpp"
#include "cfcnn/verify.hpp"

namespace cfcnn::cli {
namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << content;
  if (!f.flush()) throw IoError("failed writing '" + path + "'");
}

/// Data set named by the config with its tangent file attached, checked
/// against the network.
io::Dataset load_run_data(const io::RunConfig& cfg, const NetworkSpec<double>& spec) {
  if (cfg.data.empty()) throw ConfigError("config does not name a data file ('data = ...')");
  auto data = io::load_dataset(cfg.data);
  io::require_dataset_fits(spec, data);
  if (!cfg.tangent.empty()) {
    const auto tangents =
        io::load_tangents(cfg.tangent, data.input, data.classes, static_cast<Index>(data.samples.size()));
    io::attach_tangents(data, tangents);
  }
  return data;
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

}  // namespace

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const std::exception& ex) {
    std::string msg = ex.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    err << "error: " << msg << '\n';
    return kExitUsage;
  }
}

int cmd_train(const TrainOptions& opts, std::ostream& out) {
  auto cfg = io::load_config(opts.config);
  if (opts.eta) cfg.train.eta = *opts.eta;
  if (opts.lambda) cfg.train.lambda = *opts.lambda;
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (opts.iterations) cfg.train.iterations = *opts.iterations;
  if (opts.batch_size) cfg.train.batch_size = *opts.batch_size;
  cfg.train.validate();

  TrainMode mode;
  if (opts.mode == "single") mode = TrainMode::Single;
  else if (opts.mode == "batch") mode = TrainMode::Batch;
  else throw ConfigError("unknown mode '" + opts.mode + "' (expected single or batch)");

  const auto spec = cfg.build_network();
  require_second_order_allowed(spec, cfg.train.lambda);
  const auto data = load_run_data(cfg, spec);
  if (data.samples.empty()) throw ConfigError("data file holds no samples");

  std::ostringstream curve;
  auto state = init_params(spec, cfg.train.seed, cfg.train.init_scale);
  state = train(spec, std::move(state), data.samples, cfg.train, mode, [&](const CurvePoint& p) {
    curve << p.iteration << ' ' << io::format_number(p.J) << ' ' << io::format_number(p.R) << ' '
          << io::format_number(p.total) << '\n';
  });

  if (opts.out.empty()) out << curve.str();
  else write_file(opts.out, curve.str());
  if (!opts.params_out.empty()) write_file(opts.params_out, io::format_params(spec, state));
  return kExitOk;
}

int cmd_grad_check(const GradCheckOptions& opts, std::ostream& out) {
  if (!(opts.h > 0.0)) throw ConfigError("--h must be positive");
  const auto cfg = io::load_config(opts.config);
  const auto spec = cfg.build_network();
  const std::uint64_t seed = opts.seed.value_or(cfg.train.seed);

  Sample<double> sample;
  if (!cfg.data.empty()) {
    const auto data = load_run_data(cfg, spec);
    if (opts.sample < 1 || opts.sample > static_cast<Index>(data.samples.size())) {
      throw ConfigError("--sample " + std::to_string(opts.sample) + " outside 1.." +
                        std::to_string(data.samples.size()));
    }
    sample = data.samples[static_cast<std::size_t>(opts.sample - 1)];
  } else {
    std::mt19937_64 rng(seed);
    sample = testbed::random_sample(rng, spec, opts.random_tangents);
  }
  const bool with_r = !sample.tangents.empty();
  if (with_r) {
    for (Index t = 1; t <= spec.depth(); ++t) {
      if (!spec.layer(t).nl.smooth()) {
        throw ConfigError("layer " + std::to_string(t) + ": relu network cannot be checked against tangent targets");
      }
    }
  }

  const auto state = init_params(spec, seed, cfg.train.init_scale);
  bool ok = true;
  auto report = [&](const char* loss, const verify::GradientComparison& cmp, double tol) {
    for (std::size_t t = 0; t < cmp.layer_max_rel.size(); ++t) {
      out << "grad-check " << loss << " layer " << t + 1 << " max_rel " << sci(cmp.layer_max_rel[t]) << " max_abs "
          << sci(cmp.layer_max_abs[t]) << " tol " << sci(tol) << '\n';
    }
    out << "grad-check " << loss << ' ' << (cmp.pass() ? "PASS" : "FAIL") << " (" << cmp.failures << " of "
        << cmp.coordinates << " coordinates outside tolerance)\n";
    ok = ok && cmp.pass();
  };

  const auto analytic_j = grads_first_order(spec, state, sample);
  const auto numeric_j = verify::fd_gradient<double>(
      [&](const NetworkState<double>& s) { return loss_J(spec, s, sample); }, state, opts.h);
  report("J", verify::compare_gradients(analytic_j, numeric_j, opts.tol, opts.abs_tol), opts.tol);

  if (with_r) {
    const auto analytic_r = grads_higher_order(spec, state, sample);
    const auto numeric_r = verify::fd_gradient<double>(
        [&](const NetworkState<double>& s) { return loss_R(spec, s, sample); }, state, opts.h);
    report("R", verify::compare_gradients(analytic_r, numeric_r, opts.tol_r, opts.abs_tol_r), opts.tol_r);
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_adjoint_check(const AdjointCheckOptions& opts, std::ostream& out) {
  if (opts.dims < 1) throw ConfigError("--dims must be at least 1");
  if (opts.trials < 1) throw ConfigError("--trials must be at least 1");
  verify::AdjointCheckOptions check;
  check.trials = opts.trials;
  check.tol = opts.tol;
  check.dense_tol = opts.dense_tol;
  if (opts.seed) check.seed = *opts.seed;

  std::vector<verify::AdjointReport> reports;
  if (opts.family.empty()) reports = run_adjoint_suite(opts.dims, check);
  else reports.push_back(run_adjoint_family(opts.family, opts.dims, check));

  bool ok = true;
  for (const auto& r : reports) {
    out << (opts.verbose ? verify::render_text(r) : verify::check_lines(r));
    ok = ok && r.pass();
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_gen_data(const GenDataOptions& opts, std::ostream& out) {
  const auto data = io::make_blob_dataset(opts.seed, opts.count, opts.rows, opts.cols, opts.depth, opts.noise);
  const auto text = io::format_dataset(data);
  if (opts.out.empty()) out << text;
  else write_file(opts.out, text);
  if (!opts.tangent_out.empty()) {
    write_file(opts.tangent_out, io::format_tangents(io::translation_tangents(data), data.input, data.classes));
  }
  return kExitOk;
}

}  // namespace cfcnn::cli
