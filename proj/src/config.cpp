#include "cfcnn/io/config.hpp"

#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "text.hpp"

namespace cfcnn::io {
namespace {

using text::parse_double;
using text::parse_int;
using text::trim;

Index positive(std::string_view value, std::size_t line, const char* key) {
  const auto v = parse_int(value, line);
  if (v <= 0) throw ParseError(line, std::string(key) + " must be a positive integer");
  return static_cast<Index>(v);
}

Activation parse_activation(std::string_view value, std::size_t line) {
  if (value == "tanh") return Activation::Tanh;
  if (value == "sigmoid") return Activation::Sigmoid;
  if (value == "relu") return Activation::Relu;
  throw ParseError(line, "unknown activation '" + std::string(value) + "' (expected tanh, sigmoid or relu)");
}

std::vector<Vec1D> parse_mixing(std::string_view value, std::size_t line) {
  std::vector<Vec1D> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = value.find(',', start);
    const auto group = trim(value.substr(start, comma == std::string_view::npos ? value.npos : comma - start));
    const auto tokens = text::split_ws(group);
    if (tokens.empty()) throw ParseError(line, "empty mixing vector");
    Vec1D v(static_cast<Index>(tokens.size()));
    for (std::size_t i = 0; i < tokens.size(); ++i) v[static_cast<Index>(i)] = parse_double(tokens[i], line);
    out.push_back(std::move(v));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void set_global(RunConfig& cfg, std::string_view key, std::string_view value, std::size_t line) {
  if (key == "eta") cfg.train.eta = parse_double(value, line);
  else if (key == "lambda") cfg.train.lambda = parse_double(value, line);
  else if (key == "batch_size") cfg.train.batch_size = positive(value, line, "batch_size");
  else if (key == "iterations") {
    const auto v = parse_int(value, line);
    if (v < 0) throw ParseError(line, "iterations must be nonnegative");
    cfg.train.iterations = static_cast<Index>(v);
  } else if (key == "seed") cfg.train.seed = text::parse_uint(value, line);
  else if (key == "init_scale") cfg.train.init_scale = parse_double(value, line);
  else if (key == "classes") cfg.classes = positive(value, line, "classes");
  else if (key == "data") cfg.data = std::string(value);
  else if (key == "tangent") cfg.tangent = std::string(value);
  else throw ParseError(line, "unknown key '" + std::string(key) + "'");
}

void set_layer(LayerConfig& layer, std::string_view key, std::string_view value, std::size_t line) {
  if (key == "in_rows") layer.in_rows = positive(value, line, "in_rows");
  else if (key == "in_cols") layer.in_cols = positive(value, line, "in_cols");
  else if (key == "in_depth") layer.in_depth = positive(value, line, "in_depth");
  else if (key == "filter_rows") layer.filter_rows = positive(value, line, "filter_rows");
  else if (key == "filter_cols") layer.filter_cols = positive(value, line, "filter_cols");
  else if (key == "stride") layer.stride = positive(value, line, "stride");
  else if (key == "pool") layer.pool = positive(value, line, "pool");
  else if (key == "out_depth") layer.out_depth = positive(value, line, "out_depth");
  else if (key == "activation") layer.activation = parse_activation(value, line);
  else if (key == "mixing") layer.mixing = parse_mixing(value, line);
  else throw ParseError(line, "unknown layer key '" + std::string(key) + "'");
}

const char* const kRequiredLayerKeys[] = {"in_rows", "in_cols", "in_depth", "filter_rows",
                                          "filter_cols", "out_depth", "activation"};

}  // namespace

NetworkSpec<double> RunConfig::build_network() const {
  if (layers.empty()) throw ConfigError("config defines no [layer] sections");
  std::vector<LayerSpec<double>> specs;
  for (std::size_t t = 0; t < layers.size(); ++t) {
    const auto& l = layers[t];
    const bool is_final = t + 1 == layers.size();
    try {
      const ConvGeometry g(l.in_rows, l.in_cols, l.filter_rows, l.filter_cols, l.stride);
      specs.push_back(make_layer<double>(g, l.in_depth, l.out_depth, Nonlinearity{l.activation}, l.pool, is_final,
                                         l.mixing));
    } catch (const std::exception& ex) {
      throw ConfigError("layer " + std::to_string(t + 1) + ": " + ex.what());
    }
  }
  NetworkSpec<double> spec(std::move(specs));
  if (classes && *classes != spec.classes()) {
    throw ConfigError("classes = " + std::to_string(*classes) + " but the final layer has out_depth " +
                      std::to_string(spec.classes()));
  }
  return spec;
}

RunConfig parse_config(std::string_view input) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen_global;
  std::set<std::string, std::less<>> seen_layer;
  std::size_t layer_line = 0;
  auto close_layer = [&] {
    if (cfg.layers.empty()) return;
    for (const char* key : kRequiredLayerKeys) {
      if (!seen_layer.count(key)) {
        throw ParseError(layer_line, "layer " + std::to_string(cfg.layers.size()) + " is missing '" + key + "'");
      }
    }
  };

  const auto lines = text::split_lines(input);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line = i + 1;
    auto content = lines[i];
    if (const auto hash = content.find('#'); hash != std::string_view::npos) content = content.substr(0, hash);
    content = trim(content);
    if (content.empty()) continue;
    if (content.front() == '[') {
      if (content != "[layer]") throw ParseError(line, "unknown section '" + std::string(content) + "'");
      close_layer();
      cfg.layers.emplace_back();
      seen_layer.clear();
      layer_line = line;
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string_view::npos) throw ParseError(line, "expected 'key = value'");
    const auto key = trim(content.substr(0, eq));
    const auto value = trim(content.substr(eq + 1));
    if (key.empty()) throw ParseError(line, "missing key");
    if (value.empty()) throw ParseError(line, "missing value for '" + std::string(key) + "'");
    auto& seen = cfg.layers.empty() ? seen_global : seen_layer;
    if (!seen.insert(std::string(key)).second) throw ParseError(line, "duplicate key '" + std::string(key) + "'");
    if (cfg.layers.empty()) {
      set_global(cfg, key, value, line);
    } else {
      set_layer(cfg.layers.back(), key, value, line);
    }
  }
  close_layer();
  cfg.build_network();
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(text::read_file(path)); }

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buf, ptr);
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "eta = " << format_number(cfg.train.eta) << '\n'
     << "lambda = " << format_number(cfg.train.lambda) << '\n'
     << "batch_size = " << cfg.train.batch_size << '\n'
     << "iterations = " << cfg.train.iterations << '\n'
     << "seed = " << cfg.train.seed << '\n'
     << "init_scale = " << format_number(cfg.train.init_scale) << '\n';
  if (cfg.classes) os << "classes = " << *cfg.classes << '\n';
  if (!cfg.data.empty()) os << "data = " << cfg.data << '\n';
  if (!cfg.tangent.empty()) os << "tangent = " << cfg.tangent << '\n';
  for (const auto& l : cfg.layers) {
    os << "\n[layer]\n"
       << "in_rows = " << l.in_rows << '\n'
       << "in_cols = " << l.in_cols << '\n'
       << "in_depth = " << l.in_depth << '\n'
       << "filter_rows = " << l.filter_rows << '\n'
       << "filter_cols = " << l.filter_cols << '\n'
       << "stride = " << l.stride << '\n'
       << "pool = " << l.pool << '\n'
       << "out_depth = " << l.out_depth << '\n'
       << "activation = " << activation_name(l.activation) << '\n';
    if (!l.mixing.empty()) {
      os << "mixing =";
      for (std::size_t a = 0; a < l.mixing.size(); ++a) {
        if (a > 0) os << ',';
        for (Index i = 0; i < l.mixing[a].size(); ++i) os << ' ' << format_number(l.mixing[a][i]);
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace cfcnn::io
