#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "cfcnn/feature_stack.hpp"

namespace cfcnn::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

struct TrainOptions {
  std::string config;
  std::string mode = "single";  // single | batch
  std::string out;              // curve file; empty writes to stdout
  std::string params_out;
  std::optional<double> eta;
  std::optional<double> lambda;
  std::optional<std::uint64_t> seed;
  std::optional<Index> iterations;
  std::optional<Index> batch_size;
};

struct GradCheckOptions {
  std::string config;
  double h = 1e-5;
  double tol = 1e-6;        // relative, J
  double tol_r = 1e-5;      // relative, R
  double abs_tol = 1e-8;    // near-zero coordinates, J
  double abs_tol_r = 1e-7;  // near-zero coordinates, R
  Index sample = 1;
  Index random_tangents = 0;  // used only when the config names no data
  std::optional<std::uint64_t> seed;
};

struct AdjointCheckOptions {
  Index dims = 6;
  Index trials = 100;
  double tol = 1e-10;
  double dense_tol = 1e-12;
  std::optional<std::uint64_t> seed;
  std::string family;  // empty: all
  bool verbose = false;
};

struct GenDataOptions {
  std::string out;
  std::string tangent_out;
  std::uint64_t seed = 1;
  Index count = 40;
  Index rows = 6;
  Index cols = 6;
  Index depth = 1;
  double noise = 0.3;
};

int cmd_train(const TrainOptions& opts, std::ostream& out);
int cmd_grad_check(const GradCheckOptions& opts, std::ostream& out);
int cmd_adjoint_check(const AdjointCheckOptions& opts, std::ostream& out);
int cmd_gen_data(const GenDataOptions& opts, std::ostream& out);

/// Runs `body`, turning any exception into one `error: <message>` line on
/// `err` and exit code 2.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace cfcnn::cli
