#include "wats/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

namespace wats::io {

using nlohmann::json;

void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

double parse_double(std::string_view tok, const fs::path& path, std::size_t line_no) {
  tok = trim(tok);
  // from_chars for double is available in libstdc++ 11.
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty()) {
    throw InputError(path.string() + ":" + std::to_string(line_no) + ": malformed number '" +
                     std::string(tok) + "'");
  }
  return v;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

Graph read_edge_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open edge list " + path.string());
  try {
    return load_edge_list(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string edge_list_text(const Graph& g) {
  std::string out = "# undirected edge list: src\tdst\n";
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    for (std::size_t j : g.neighbors(i)) {
      if (j > i) out += std::to_string(i) + "\t" + std::to_string(j) + "\n";
    }
  }
  return out;
}

Matrix read_logits(const fs::path& path) {
  const auto lines = split_lines(read_file(path));
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = trim(lines[n]);
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      values.push_back(parse_double(line.substr(start, comma - start), path, n + 1));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = count;
    if (count != cols) {
      throw InputError(path.string() + ":" + std::to_string(n + 1) + ": expected " +
                       std::to_string(cols) + " columns, got " + std::to_string(count));
    }
    ++rows;
  }
  Matrix m(rows, cols);
  m.data() = std::move(values);
  return m;
}

std::string logits_text(const Matrix& logits) {
  std::string out;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::size_t> read_labels(const fs::path& path) {
  const auto lines = split_lines(read_file(path));
  std::vector<std::size_t> labels;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = trim(lines[n]);
    if (line.empty()) continue;
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw InputError(path.string() + ":" + std::to_string(n + 1) + ": malformed label '" +
                       std::string(line) + "'");
    }
    labels.push_back(v);
  }
  return labels;
}

std::string labels_text(const std::vector<std::size_t>& labels) {
  std::string out;
  for (std::size_t y : labels) out += std::to_string(y) + "\n";
  return out;
}

Split read_split(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
    Split s;
    s.train = j.value("train", std::vector<std::size_t>{});
    s.val = j.value("val", std::vector<std::size_t>{});
    s.test = j.value("test", std::vector<std::size_t>{});
    return s;
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": malformed split JSON (" + e.what() + ")");
  }
}

std::string split_text(const Split& split) {
  json j;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  return j.dump() + "\n";
}

std::string features_csv(const WaveletFeatures& h) {
  std::string out = "node";
  for (std::size_t k = 0; k < h.width(); ++k) out += ",h" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < h.num_nodes; ++i) {
    out += std::to_string(i);
    for (double v : h.values.row(i)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

WaveletFeatures read_features_csv(const fs::path& path) {
  const auto lines = split_lines(read_file(path));
  if (lines.empty() || trim(lines[0]).substr(0, 4) != "node") {
    throw InputError(path.string() + ": missing feature header");
  }
  const auto header = trim(lines[0]);
  const auto width = static_cast<std::size_t>(std::count(header.begin(), header.end(), ','));
  if (width < 2) throw InputError(path.string() + ": need at least two feature columns");

  std::vector<double> values;
  std::size_t rows = 0;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto line = trim(lines[n]);
    if (line.empty()) continue;
    std::size_t start = line.find(',');
    if (start == std::string_view::npos) {
      throw InputError(path.string() + ":" + std::to_string(n + 1) + ": malformed row");
    }
    std::size_t count = 0;
    ++start;
    while (true) {
      const auto comma = line.find(',', start);
      values.push_back(parse_double(line.substr(start, comma - start), path, n + 1));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (count != width) {
      throw InputError(path.string() + ":" + std::to_string(n + 1) + ": expected " +
                       std::to_string(width) + " features");
    }
    ++rows;
  }
  WaveletFeatures h;
  h.num_nodes = rows;
  h.order_k = width - 1;
  h.values = Matrix(rows, width);
  h.values.data() = std::move(values);
  h.raw_norms.assign(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (double v : h.values.row(i)) h.raw_norms[i] += std::abs(v);
  }
  return h;
}

json to_json(const CalibratorParams& params, const WaveletConfig& wavelet) {
  json j;
  j["hidden_dim"] = params.hidden_dim;
  j["input_dim"] = params.input_dim;
  j["dropout"] = params.dropout_rate;
  j["w1"] = params.w1.data();
  j["b1"] = params.b1;
  j["w2"] = params.w2;
  j["b2"] = params.b2;
  j["wavelet"] = {{"k", wavelet.order_k},
                  {"s", wavelet.scale_s},
                  {"scheme", to_string(wavelet.coeff_scheme)},
                  {"lambda_max", wavelet.lambda_max}};
  j["seed"] = params.rng_seed;
  return j;
}

CalibratorParams calibrator_from_json(const json& j) {
  try {
    const auto hidden = j.at("hidden_dim").get<std::size_t>();
    const auto input = j.contains("input_dim") ? j.at("input_dim").get<std::size_t>()
                                               : j.at("wavelet").at("k").get<std::size_t>() + 1;
    auto p = CalibratorParams::zeros(input, hidden);
    p.dropout_rate = j.at("dropout").get<double>();
    p.w1.data() = j.at("w1").get<std::vector<double>>();
    p.b1 = j.at("b1").get<std::vector<double>>();
    p.w2 = j.at("w2").get<std::vector<double>>();
    p.b2 = j.at("b2").get<double>();
    p.rng_seed = j.at("seed").get<std::uint64_t>();
    if (p.w1.data().size() != hidden * input) throw InputError("w1 has the wrong size");
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed calibrator JSON: ") + e.what());
  }
}

namespace {

json degree_bound(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double degree_bound(const json& j) {
  return j.is_null() ? kUnboundedDegree : j.get<double>();
}

}  // namespace

json to_json(const CalibrationReport& r) {
  json bins = json::array();
  for (const auto& b : r.bins) {
    bins.push_back({{"bin", b.bin_index},
                    {"lo", b.lo},
                    {"hi", b.hi},
                    {"count", b.count},
                    {"accuracy", b.accuracy},
                    {"confidence", b.confidence}});
  }
  json degree = json::array();
  for (const auto& b : r.degree_bins) {
    degree.push_back({{"degree_lo", degree_bound(b.degree_lo)},
                      {"degree_hi", degree_bound(b.degree_hi)},
                      {"count", b.count},
                      {"accuracy", b.accuracy},
                      {"confidence", b.confidence},
                      {"ece", b.ece}});
  }
  return {{"method_tag", r.method_tag}, {"ece", r.ece},
          {"nll", r.nll},               {"accuracy", r.accuracy},
          {"num_bins", r.num_bins},     {"num_nodes", r.num_nodes},
          {"bins", bins},               {"degree_bins", degree},
          {"config_echo", r.config_echo}};
}

CalibrationReport report_from_json(const json& j) {
  CalibrationReport r;
  r.method_tag = j.at("method_tag").get<std::string>();
  r.ece = j.at("ece").get<double>();
  r.nll = j.at("nll").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.num_bins = j.at("num_bins").get<std::size_t>();
  r.num_nodes = j.value("num_nodes", std::size_t{0});
  for (const auto& b : j.at("bins")) {
    r.bins.push_back({b.at("bin").get<std::size_t>(), b.at("lo").get<double>(),
                      b.at("hi").get<double>(), b.at("count").get<std::size_t>(),
                      b.at("accuracy").get<double>(), b.at("confidence").get<double>()});
  }
  for (const auto& b : j.value("degree_bins", json::array())) {
    r.degree_bins.push_back({degree_bound(b.at("degree_lo")), degree_bound(b.at("degree_hi")),
                             b.at("count").get<std::size_t>(), b.at("accuracy").get<double>(),
                             b.at("confidence").get<double>(), b.at("ece").get<double>()});
  }
  r.config_echo = j.value("config_echo", std::string{});
  return r;
}

std::string reliability_csv(const CalibrationReport& report) {
  std::string out = "bin_lo,bin_hi,count,accuracy,confidence\n";
  for (const auto& b : report.bins) {
    out += format_double(b.lo) + "," + format_double(b.hi) + "," + std::to_string(b.count) +
           "," + format_double(b.accuracy) + "," + format_double(b.confidence) + "\n";
  }
  return out;
}

std::string degree_bins_csv(const CalibrationReport& report) {
  std::string out = "degree_lo,degree_hi,count,accuracy,confidence,ece\n";
  for (const auto& b : report.degree_bins) {
    out += format_double(b.degree_lo) + "," +
           (std::isfinite(b.degree_hi) ? format_double(b.degree_hi) : std::string("inf")) + "," +
           std::to_string(b.count) + "," + format_double(b.accuracy) + "," +
           format_double(b.confidence) + "," + format_double(b.ece) + "\n";
  }
  return out;
}

}  // namespace wats::io
