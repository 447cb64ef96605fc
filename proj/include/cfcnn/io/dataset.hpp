#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cfcnn/io/config.hpp"
#include "cfcnn/network.hpp"
#include "cfcnn/training.hpp"

namespace cfcnn::io {

struct Dataset {
  Shape input;
  Index classes = 0;
  std::vector<Sample<double>> samples;
};

/// Text format:
///
///     cfcnn-data n l m N count
///     <n*l*m input scalars, slice-major>
///     <N target scalars>
///     ...
///
/// Blank lines and `#` comments are skipped; each record must sit on one line.
Dataset parse_dataset(std::string_view text);
Dataset load_dataset(const std::string& path);
std::string format_dataset(const Dataset& data);

/// Sample index (1-based) to its tangent targets.
using TangentMap = std::map<Index, std::vector<TangentTarget<double>>>;

/// Records of three lines: sample index, V_X scalars, beta_X scalars. An
/// optional first line `cfcnn-tangent n l m N` is checked against the
/// expected shapes. Repeated indices accumulate.
TangentMap parse_tangents(std::string_view text, const Shape& input, Index classes, Index sample_count);
TangentMap load_tangents(const std::string& path, const Shape& input, Index classes, Index sample_count);
std::string format_tangents(const TangentMap& tangents, const Shape& input, Index classes);

void attach_tangents(Dataset& data, const TangentMap& tangents);

/// Throws ConfigError when the data shapes do not fit the network.
void require_dataset_fits(const NetworkSpec<double>& spec, const Dataset& data);

/// Two Gaussian blobs around opposite top/bottom patterns, alternating
/// classes, one-hot targets.
Dataset make_blob_dataset(std::uint64_t seed, Index count, Index rows, Index cols, Index depth = 1,
                          double noise = 0.3);

/// One zero-beta target per sample with V_X the forward column difference of
/// x, i.e. a discrete horizontal translation.
TangentMap translation_tangents(const Dataset& data);

/// Parameter dump: `cfcnn-params L`, then for each layer a `W t p q m` line,
/// its scalars, a `B t n l m` line and its scalars.
std::string format_params(const NetworkSpec<double>& spec, const NetworkState<double>& state);

}  // namespace cfcnn::io
