#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfcnn/commands.hpp"
#include "cfcnn/defects.hpp"

using namespace cfcnn;

namespace {

template <typename T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& slot, const std::string& help) {
  app->add_option_function<T>(name, [&slot](const T& v) { slot = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional network training and verification"};
  app.require_subcommand(1);

  std::string defect_name;
  app.add_option("--defect", defect_name)->group("");  // hidden: mutation testing

  cli::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Run gradient descent and write the loss curve");
  train_cmd->add_option("config", train.config, "Config file")->required();
  train_cmd->add_option("--mode", train.mode, "single (per-sample updates) or batch (summed update)")
      ->check(CLI::IsMember({"single", "batch"}));
  train_cmd->add_option("--out", train.out, "Curve file: one 'iter J R total' line per iteration");
  train_cmd->add_option("--params-out", train.params_out, "Write final parameters here");
  optional_flag(train_cmd, "--eta", train.eta, "Override step size");
  optional_flag(train_cmd, "--lambda", train.lambda, "Override tangent penalty weight");
  optional_flag(train_cmd, "--seed", train.seed, "Override initialisation seed");
  optional_flag(train_cmd, "--iterations", train.iterations, "Override iteration count");
  optional_flag(train_cmd, "--batch-size", train.batch_size, "Override batch size");

  cli::GradCheckOptions grad;
  auto* grad_cmd = app.add_subcommand("grad-check", "Compare analytic gradients with central differences");
  grad_cmd->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  grad_cmd->add_option("config", grad.config, "Config file")->required();
  grad_cmd->add_option("--h", grad.h, "Finite-difference step");
  grad_cmd->add_option("--tol", grad.tol, "Relative tolerance for J");
  grad_cmd->add_option("--tol-r", grad.tol_r, "Relative tolerance for R");
  grad_cmd->add_option("--abs-tol", grad.abs_tol, "Absolute part of the J tolerance");
  grad_cmd->add_option("--abs-tol-r", grad.abs_tol_r, "Absolute part of the R tolerance");
  grad_cmd->add_option("--sample", grad.sample, "1-based sample index in the data file");
  grad_cmd->add_option("--random-tangents", grad.random_tangents,
                       "Tangent targets on the random sample used when no data file is configured");
  optional_flag(grad_cmd, "--seed", grad.seed, "Override parameter seed");

  cli::AdjointCheckOptions adj;
  auto* adj_cmd = app.add_subcommand("adjoint-check", "Verify every operator against its adjoint");
  adj_cmd->add_option("--dims", adj.dims, "Upper bound for random dimensions");
  adj_cmd->add_option("--trials", adj.trials, "Random instances per family");
  adj_cmd->add_option("--tol", adj.tol, "Inner-product identity tolerance");
  adj_cmd->add_option("--dense-tol", adj.dense_tol, "Dense transpose tolerance");
  adj_cmd->add_option("--family", adj.family, "Check one family only");
  adj_cmd->add_flag("--verbose", adj.verbose, "Readable report instead of CHECK lines");
  optional_flag(adj_cmd, "--seed", adj.seed, "Base seed");

  cli::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a seeded two-class blob data set");
  gen_cmd->add_option("--out", gen.out, "Data file (stdout when omitted)");
  gen_cmd->add_option("--tangent-out", gen.tangent_out, "Also write zero-beta translation tangents");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--count", gen.count);
  gen_cmd->add_option("--rows", gen.rows);
  gen_cmd->add_option("--cols", gen.cols);
  gen_cmd->add_option("--depth", gen.depth);
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise standard deviation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitUsage;
  }

  std::optional<ScopedDefect> defect;
  if (!defect_name.empty()) {
    const auto d = parse_defect(defect_name);
    if (!d) {
      std::cerr << "error: unknown defect '" << defect_name << "'\n";
      return cli::kExitUsage;
    }
    defect.emplace(*d);
  }

  return cli::guarded(
      [&] {
        if (*train_cmd) return cli::cmd_train(train, std::cout);
        if (*grad_cmd) return cli::cmd_grad_check(grad, std::cout);
        if (*adj_cmd) return cli::cmd_adjoint_check(adj, std::cout);
        return cli::cmd_gen_data(gen, std::cout);
      },
      std::cerr);
}
