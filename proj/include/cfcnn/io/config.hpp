#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cfcnn/network.hpp"
#include "cfcnn/operators.hpp"
#include "cfcnn/training.hpp"

namespace cfcnn::io {

/// Malformed input text; `line()` is 1-based (0 when not tied to a line).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct LayerConfig {
  Index in_rows = 0;
  Index in_cols = 0;
  Index in_depth = 0;
  Index filter_rows = 0;
  Index filter_cols = 0;
  Index stride = 1;
  Index pool = 1;
  Index out_depth = 0;
  Activation activation = Activation::Tanh;
  std::vector<Vec1D> mixing;  // empty: full mixing

  friend bool operator==(const LayerConfig& a, const LayerConfig& b) {
    return a.in_rows == b.in_rows && a.in_cols == b.in_cols && a.in_depth == b.in_depth &&
           a.filter_rows == b.filter_rows && a.filter_cols == b.filter_cols && a.stride == b.stride &&
           a.pool == b.pool && a.out_depth == b.out_depth && a.activation == b.activation &&
           same_vectors(a.mixing, b.mixing);
  }
};

/// Everything a run needs: network layout, training settings and data paths.
struct RunConfig {
  std::vector<LayerConfig> layers;
  std::optional<Index> classes;
  TrainConfig train;
  std::string data;
  std::string tangent;

  /// Builds and validates the network; the last layer is the final one.
  NetworkSpec<double> build_network() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses the line-oriented `key = value` format:
///
///     # global keys
///     eta = 0.01
///     lambda = 0
///     data = toy.txt
///     [layer]
///     in_rows = 6
///     ...
///
/// Global keys: eta, lambda, batch_size, iterations, seed, init_scale,
/// classes, data, tangent. Layer keys: in_rows, in_cols, in_depth,
/// filter_rows, filter_cols, stride, pool, out_depth, activation
/// (tanh|sigmoid|relu), mixing (comma-separated vectors, one per output
/// slice). Unknown keys are rejected. The network is built and validated
/// before returning.
RunConfig parse_config(std::string_view text);

RunConfig load_config(const std::string& path);

/// Inverse of parse_config; numbers use shortest round-trip form.
std::string serialize_config(const RunConfig& config);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);

}  // namespace cfcnn::io
