#include "cfcnn/io/dataset.hpp"

#include <random>
#include <sstream>

#include "text.hpp"

namespace cfcnn::io {
namespace {

/// Non-blank, comment-stripped lines with their 1-based line numbers.
struct Lines {
  std::vector<std::pair<std::size_t, std::string_view>> items;
  std::size_t pos = 0;
  std::size_t total = 0;

  explicit Lines(std::string_view input) {
    const auto raw = text::split_lines(input);
    total = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto content = raw[i];
      if (const auto hash = content.find('#'); hash != std::string_view::npos) content = content.substr(0, hash);
      content = text::trim(content);
      if (!content.empty()) items.emplace_back(i + 1, content);
    }
  }

  bool done() const { return pos >= items.size(); }

  std::pair<std::size_t, std::string_view> next(const std::string& what) {
    if (done()) throw ParseError(total + 1, "unexpected end of file, expected " + what);
    return items[pos++];
  }
};

Vec1D read_scalars(Lines& lines, Index expected, const std::string& what) {
  const auto [line, content] = lines.next(what);
  const auto tokens = text::split_ws(content);
  if (static_cast<Index>(tokens.size()) != expected) {
    throw ParseError(line, what + ": expected " + std::to_string(expected) + " values, got " +
                               std::to_string(tokens.size()));
  }
  Vec1D v(expected);
  for (Index i = 0; i < expected; ++i) v[i] = text::parse_double(tokens[static_cast<std::size_t>(i)], line);
  return v;
}

Index positive_field(std::string_view token, std::size_t line, const char* name) {
  const auto v = text::parse_int(token, line);
  if (v <= 0) throw ParseError(line, std::string(name) + " must be positive");
  return static_cast<Index>(v);
}

void write_scalars(std::ostream& os, const Vec1D& v) {
  for (Index i = 0; i < v.size(); ++i) {
    if (i > 0) os << ' ';
    os << format_number(v[i]);
  }
  os << '\n';
}

}  // namespace

Dataset parse_dataset(std::string_view input) {
  Lines lines(input);
  const auto [hline, header] = lines.next("header 'cfcnn-data n l m N count'");
  const auto tok = text::split_ws(header);
  if (tok.size() != 6 || tok[0] != "cfcnn-data") {
    throw ParseError(hline, "expected header 'cfcnn-data n l m N count'");
  }
  Dataset data;
  data.input = {positive_field(tok[1], hline, "n"), positive_field(tok[2], hline, "l"),
                positive_field(tok[3], hline, "m")};
  data.classes = positive_field(tok[4], hline, "N");
  const auto count = text::parse_int(tok[5], hline);
  if (count < 0) throw ParseError(hline, "count must be nonnegative");
  for (std::int64_t s = 1; s <= count; ++s) {
    const auto tag = "sample " + std::to_string(s);
    Sample<double> sample;
    sample.x = Stack(data.input, read_scalars(lines, data.input.size(), tag + " input"));
    sample.y = read_scalars(lines, data.classes, tag + " target");
    data.samples.push_back(std::move(sample));
  }
  if (!lines.done()) {
    throw ParseError(lines.items[lines.pos].first,
                     "trailing data after " + std::to_string(count) + " samples");
  }
  return data;
}

Dataset load_dataset(const std::string& path) { return parse_dataset(text::read_file(path)); }

std::string format_dataset(const Dataset& data) {
  std::ostringstream os;
  os << "cfcnn-data " << data.input.rows << ' ' << data.input.cols << ' ' << data.input.depth << ' '
     << data.classes << ' ' << data.samples.size() << '\n';
  for (const auto& s : data.samples) {
    write_scalars(os, s.x.coeffs());
    write_scalars(os, s.y);
  }
  return os.str();
}

TangentMap parse_tangents(std::string_view input, const Shape& shape, Index classes, Index sample_count) {
  Lines lines(input);
  TangentMap out;
  if (!lines.done() && text::split_ws(lines.items[0].second).front() == "cfcnn-tangent") {
    const auto [hline, header] = lines.next("header");
    const auto tok = text::split_ws(header);
    if (tok.size() != 5) throw ParseError(hline, "expected header 'cfcnn-tangent n l m N'");
    const Shape declared{positive_field(tok[1], hline, "n"), positive_field(tok[2], hline, "l"),
                         positive_field(tok[3], hline, "m")};
    const Index n_classes = positive_field(tok[4], hline, "N");
    if (declared != shape || n_classes != classes) {
      throw ParseError(hline, "tangent shapes " + declared.str() + "/" + std::to_string(n_classes) +
                                  " do not match data " + shape.str() + "/" + std::to_string(classes));
    }
  }
  while (!lines.done()) {
    const auto [iline, itext] = lines.next("sample index");
    const auto index = text::parse_int(itext, iline);
    if (index < 1 || index > sample_count) {
      throw ParseError(iline, "sample index " + std::to_string(index) + " outside 1.." + std::to_string(sample_count));
    }
    const auto tag = "tangent for sample " + std::to_string(index);
    TangentTarget<double> t{Stack(shape, read_scalars(lines, shape.size(), tag + " V")),
                            read_scalars(lines, classes, tag + " beta")};
    out[static_cast<Index>(index)].push_back(std::move(t));
  }
  return out;
}

TangentMap load_tangents(const std::string& path, const Shape& input, Index classes, Index sample_count) {
  return parse_tangents(text::read_file(path), input, classes, sample_count);
}

std::string format_tangents(const TangentMap& tangents, const Shape& input, Index classes) {
  std::ostringstream os;
  os << "cfcnn-tangent " << input.rows << ' ' << input.cols << ' ' << input.depth << ' ' << classes << '\n';
  for (const auto& [index, list] : tangents) {
    for (const auto& t : list) {
      os << index << '\n';
      write_scalars(os, t.v.coeffs());
      write_scalars(os, t.beta);
    }
  }
  return os.str();
}

void attach_tangents(Dataset& data, const TangentMap& tangents) {
  for (const auto& [index, list] : tangents) {
    if (index < 1 || index > static_cast<Index>(data.samples.size())) {
      throw ConfigError("tangent sample index " + std::to_string(index) + " out of range");
    }
    auto& dst = data.samples[static_cast<std::size_t>(index - 1)].tangents;
    dst.insert(dst.end(), list.begin(), list.end());
  }
}

void require_dataset_fits(const NetworkSpec<double>& spec, const Dataset& data) {
  if (data.input != spec.input_shape()) {
    throw ConfigError("data input shape " + data.input.str() + " does not match network input " +
                      spec.input_shape().str());
  }
  if (data.classes != spec.classes()) {
    throw ConfigError("data has " + std::to_string(data.classes) + " classes, network outputs " +
                      std::to_string(spec.classes()));
  }
}

Dataset make_blob_dataset(std::uint64_t seed, Index count, Index rows, Index cols, Index depth, double noise) {
  if (count < 0) throw ConfigError("blob data: count must be nonnegative");
  Dataset data;
  data.input = {rows, cols, depth};
  data.classes = 2;
  Stack centre(data.input);
  for (Index a = 1; a <= depth; ++a)
    for (Index i = 1; i <= rows; ++i)
      for (Index j = 1; j <= cols; ++j) centre(i, j, a) = 2 * (i - 1) < rows ? 0.5 : -0.5;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  for (Index s = 0; s < count; ++s) {
    const Index label = s % 2;
    Sample<double> sample;
    sample.x = label == 0 ? centre : -centre;
    for (Index c = 0; c < sample.x.size(); ++c) sample.x.coeffs()[c] += gauss(rng);
    sample.y = Vec1D::Zero(2);
    sample.y[label] = 1.0;
    data.samples.push_back(std::move(sample));
  }
  return data;
}

TangentMap translation_tangents(const Dataset& data) {
  TangentMap out;
  for (std::size_t s = 0; s < data.samples.size(); ++s) {
    const auto& x = data.samples[s].x;
    Stack v(x.shape());
    for (Index a = 1; a <= x.depth(); ++a)
      for (Index i = 1; i <= x.rows(); ++i)
        for (Index j = 1; j < x.cols(); ++j) v(i, j, a) = x(i, j + 1, a) - x(i, j, a);
    out[static_cast<Index>(s + 1)].push_back({std::move(v), Vec1D::Zero(data.classes)});
  }
  return out;
}

std::string format_params(const NetworkSpec<double>& spec, const NetworkState<double>& state) {
  require_compatible(spec, state);
  std::ostringstream os;
  os << "cfcnn-params " << spec.depth() << '\n';
  for (Index t = 1; t <= spec.depth(); ++t) {
    const auto& p = state.layer(t);
    const auto ws = p.w.filters.shape();
    const auto bs = p.b.shape();
    os << "W " << t << ' ' << ws.rows << ' ' << ws.cols << ' ' << ws.depth << '\n';
    write_scalars(os, p.w.filters.coeffs());
    os << "B " << t << ' ' << bs.rows << ' ' << bs.cols << ' ' << bs.depth << '\n';
    write_scalars(os, p.b.coeffs());
  }
  return os.str();
}

}  // namespace cfcnn::io
