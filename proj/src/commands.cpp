#include "wats/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>

#include "wats/io.hpp"

namespace wats::cli {

using nlohmann::json;

std::string to_string(Method m) {
  switch (m) {
    case Method::WATS: return "WATS";
    case Method::TS: return "TS";
    case Method::ETS: return "ETS";
    case Method::Uncalibrated: return "Uncalibrated";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "wats") return Method::WATS;
  if (lower == "ts") return Method::TS;
  if (lower == "ets") return Method::ETS;
  if (lower == "uncalibrated" || lower == "none") return Method::Uncalibrated;
  throw InputError("unknown method '" + name + "'");
}

std::vector<std::uint64_t> RunConfig::seed_list() const {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

namespace {

std::string optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "gd"; }

Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam" || s == "Adam") return Optimizer::Adam;
  if (s == "gd" || s == "PlainGD") return Optimizer::PlainGD;
  throw InputError("unknown optimizer '" + s + "'");
}

json degree_edges_json(const std::vector<double>& edges) {
  json arr = json::array();
  for (double e : edges) arr.push_back(std::isfinite(e) ? json(e) : json(nullptr));
  return arr;
}

}  // namespace

RunConfig run_config_from_json(const json& j, RunConfig cfg) {
  try {
    auto path = [&](const char* key, fs::path& dst) {
      if (j.contains(key)) dst = j.at(key).get<std::string>();
    };
    path("edges", cfg.edges);
    path("logits", cfg.logits);
    path("labels", cfg.labels);
    path("split", cfg.split);
    path("output_dir", cfg.output_dir);

    if (j.contains("wavelet")) {
      const auto& w = j.at("wavelet");
      cfg.wavelet.order_k = w.value("k", cfg.wavelet.order_k);
      cfg.wavelet.scale_s = w.value("s", cfg.wavelet.scale_s);
      cfg.wavelet.lambda_max = w.value("lambda_max", cfg.wavelet.lambda_max);
      if (w.contains("scheme")) {
        cfg.wavelet.coeff_scheme = parse_coefficient_scheme(w.at("scheme").get<std::string>());
      }
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
      cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
      cfg.train.patience = t.value("patience", cfg.train.patience);
      cfg.train.adam_beta1 = t.value("adam_beta1", cfg.train.adam_beta1);
      cfg.train.adam_beta2 = t.value("adam_beta2", cfg.train.adam_beta2);
      cfg.train.adam_eps = t.value("adam_eps", cfg.train.adam_eps);
      if (t.contains("optimizer")) {
        cfg.train.optimizer = parse_optimizer(t.at("optimizer").get<std::string>());
      }
      if (t.contains("selection")) {
        const auto sel = t.at("selection").get<std::string>();
        if (sel != "nll" && sel != "ece") throw InputError("selection must be nll or ece");
        cfg.train.selection = sel == "nll" ? SelectionMetric::Nll : SelectionMetric::Ece;
      }
    }
    if (j.contains("mlp")) {
      const auto& m = j.at("mlp");
      cfg.hidden_dim = m.value("hidden_dim", cfg.hidden_dim);
      cfg.dropout = m.value("dropout", cfg.dropout);
      cfg.seed = m.value("seed", cfg.seed);
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.num_bins = j.value("num_bins", cfg.num_bins);
    if (j.contains("method")) cfg.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("degree_edges")) {
      cfg.degree_edges.clear();
      for (const auto& e : j.at("degree_edges")) {
        cfg.degree_edges.push_back(e.is_null() ? kUnboundedDegree : e.get<double>());
      }
    }
    if (j.contains("ts_interval")) {
      const auto& t = j.at("ts_interval");
      cfg.ts_interval.lo = t.value("lo", cfg.ts_interval.lo);
      cfg.ts_interval.hi = t.value("hi", cfg.ts_interval.hi);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed run config: ") + e.what());
  }
  return cfg;
}

json to_json(const RunConfig& cfg, bool include_paths) {
  json j;
  if (include_paths) {
    j["edges"] = cfg.edges.string();
    j["logits"] = cfg.logits.string();
    j["labels"] = cfg.labels.string();
    j["split"] = cfg.split.string();
    j["output_dir"] = cfg.output_dir.string();
  }
  j["wavelet"] = {{"k", cfg.wavelet.order_k},
                  {"s", cfg.wavelet.scale_s},
                  {"scheme", to_string(cfg.wavelet.coeff_scheme)},
                  {"lambda_max", cfg.wavelet.lambda_max}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"max_epochs", cfg.train.max_epochs},
                {"weight_decay", cfg.train.weight_decay},
                {"patience", cfg.train.patience},
                {"optimizer", optimizer_name(cfg.train.optimizer)},
                {"adam_beta1", cfg.train.adam_beta1},
                {"adam_beta2", cfg.train.adam_beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"selection", cfg.train.selection == SelectionMetric::Nll ? "nll" : "ece"}};
  j["mlp"] = {{"hidden_dim", cfg.hidden_dim}, {"dropout", cfg.dropout}, {"seed", cfg.seed}};
  j["seeds"] = cfg.seeds;
  j["num_bins"] = cfg.num_bins;
  j["method"] = to_string(cfg.method);
  j["degree_edges"] = degree_edges_json(cfg.degree_edges);
  j["ts_interval"] = {{"lo", cfg.ts_interval.lo}, {"hi", cfg.ts_interval.hi}};
  return j;
}

namespace {

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw InputError(std::string(what) + " path is required");
  if (!fs::exists(p)) throw InputError(std::string(what) + " file not found: " + p.string());
}

struct Inputs {
  Graph graph;
  LogitSet data;
};

Inputs load_inputs(const RunConfig& cfg) {
  require_file(cfg.edges, "edges");
  require_file(cfg.logits, "logits");
  require_file(cfg.labels, "labels");
  require_file(cfg.split, "split");

  Inputs in;
  in.data.logits = io::read_logits(cfg.logits);
  in.data.labels = io::read_labels(cfg.labels);
  in.data.split = io::read_split(cfg.split);
  in.data.num_nodes = in.data.logits.rows();
  in.data.num_classes = in.data.logits.cols();
  if (in.data.split.val.empty()) throw InputError("validation split required");
  in.data.validate();

  in.graph = io::read_edge_list(cfg.edges);
  if (in.graph.num_nodes() > in.data.num_nodes) {
    throw InputError("edge list references " + std::to_string(in.graph.num_nodes()) +
                     " nodes but logits have " + std::to_string(in.data.num_nodes) + " rows");
  }
  // Trailing isolated nodes never appear in an edge list.
  if (in.graph.num_nodes() < in.data.num_nodes) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < in.graph.num_nodes(); ++i) {
      for (std::size_t j : in.graph.neighbors(i)) {
        if (j > i) edges.emplace_back(i, j);
      }
    }
    in.graph = Graph::from_edges(in.data.num_nodes, edges);
  }
  return in;
}

std::vector<std::size_t> argmax_on(const Matrix& scores, std::span<const std::size_t> nodes) {
  std::vector<std::size_t> out;
  out.reserve(nodes.size());
  for (std::size_t i : nodes) {
    const auto row = scores.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace

FeaturesOutcome cmd_features(const RunConfig& cfg) {
  require_file(cfg.edges, "edges");
  const auto start = std::chrono::steady_clock::now();
  const Graph g = io::read_edge_list(cfg.edges);
  const auto h = wavelet_features(g, cfg.wavelet);
  FeaturesOutcome out;
  out.num_nodes = h.num_nodes;
  out.order_k = h.order_k;
  out.csv = cfg.output_dir / "features.csv";
  io::write_atomic(out.csv, io::features_csv(h));
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

CalibrationOutcome run_calibration(const Graph& g, const LogitSet& data,
                                   const WaveletFeatures* features, const RunConfig& cfg) {
  data.validate();
  if (g.num_nodes() != data.num_nodes) {
    throw InputError("graph has " + std::to_string(g.num_nodes()) + " nodes but logits have " +
                     std::to_string(data.num_nodes) + " rows");
  }
  if (data.split.val.empty()) throw InputError("validation split required");
  if (data.split.test.empty()) throw InputError("test split required");

  const auto& test = data.split.test;
  CalibrationOutcome out;
  out.uncalibrated = evaluate(g, data.logits, data.labels, test, cfg.num_bins, cfg.degree_edges,
                              to_string(Method::Uncalibrated));
  out.predictions_before = argmax_on(data.logits, test);
  const std::string echo = to_json(cfg, false).dump();
  out.uncalibrated.config_echo = echo;

  switch (cfg.method) {
    case Method::Uncalibrated: {
      out.calibrated = out.uncalibrated;
      out.predictions_after = out.predictions_before;
      out.calibrator = {{"method", "Uncalibrated"}};
      break;
    }
    case Method::TS: {
      const auto ts = fit_global_ts(data, cfg.ts_interval);
      out.temperatures.assign(data.num_nodes, ts.temperature);
      const Matrix scaled = scale_logits(data.logits, out.temperatures);
      out.calibrated = evaluate(g, scaled, data.labels, test, cfg.num_bins, cfg.degree_edges,
                                to_string(Method::TS));
      out.predictions_after = argmax_on(scaled, test);
      out.calibrator = {{"method", "TS"}, {"temperature", ts.temperature}, {"val_nll", ts.nll}};
      break;
    }
    case Method::ETS: {
      const auto ets = fit_ets(data, cfg.ts_interval);
      const Matrix probs = ets.probabilities(data.logits);
      out.calibrated = evaluate_probabilities(g, probs, data.labels, test, cfg.num_bins,
                                              cfg.degree_edges, to_string(Method::ETS));
      out.predictions_after = argmax_on(probs, test);
      out.calibrator = {{"method", "ETS"},
                        {"temperature", ets.temperature},
                        {"weights", ets.weights},
                        {"val_nll", ets.nll}};
      break;
    }
    case Method::WATS: {
      if (features == nullptr) throw InputError("WATS needs wavelet features");
      const auto params0 = CalibratorParams::initialize(features->width(), cfg.hidden_dim,
                                                        cfg.dropout, cfg.seed);
      const auto trained = train_wats(*features, data, params0, cfg.train);
      out.temperatures = temperatures(trained.params, *features);
      const Matrix scaled = scale_logits(data.logits, out.temperatures);
      out.calibrated = evaluate(g, scaled, data.labels, test, cfg.num_bins, cfg.degree_edges,
                                to_string(Method::WATS));
      out.predictions_after = argmax_on(scaled, test);
      out.calibrator = io::to_json(trained.params, cfg.wavelet);
      out.calibrator["method"] = "WATS";
      out.calibrator["best_epoch"] = trained.best_epoch;
      out.calibrator["epochs_run"] = trained.epochs_run;
      out.calibrator["val_nll"] = trained.best_score;
      break;
    }
  }
  out.calibrated.config_echo = echo;
  return out;
}

CalibrationOutcome cmd_calibrate(const RunConfig& cfg) {
  const auto [graph, data] = load_inputs(cfg);
  std::optional<WaveletFeatures> features;
  if (cfg.method == Method::WATS) features = wavelet_features(graph, cfg.wavelet);
  auto out = run_calibration(graph, data, features ? &*features : nullptr, cfg);

  const auto& dir = cfg.output_dir;
  io::write_atomic(dir / "calibrator.json", out.calibrator.dump(2) + "\n");
  json report = {{"calibrated", io::to_json(out.calibrated)},
                 {"uncalibrated", io::to_json(out.uncalibrated)}};
  io::write_atomic(dir / "report.json", report.dump(2) + "\n");
  io::write_atomic(dir / "reliability.csv", io::reliability_csv(out.calibrated));
  io::write_atomic(dir / "degree_bins.csv", io::degree_bins_csv(out.calibrated));
  if (!out.temperatures.empty()) {
    std::string csv = "node,tau\n";
    for (std::size_t i = 0; i < out.temperatures.size(); ++i) {
      csv += std::to_string(i) + "," + io::format_double(out.temperatures[i]) + "\n";
    }
    io::write_atomic(dir / "temperatures.csv", csv);
  }
  return out;
}

SyntheticInstance cmd_synth(const SyntheticSpec& spec, const fs::path& out_dir) {
  auto inst = generate_synthetic(spec);
  io::write_atomic(out_dir / "edges.tsv", io::edge_list_text(inst.graph));
  io::write_atomic(out_dir / "logits.csv", io::logits_text(inst.data.logits));
  io::write_atomic(out_dir / "labels.txt", io::labels_text(inst.data.labels));
  io::write_atomic(out_dir / "split.json", io::split_text(inst.data.split));
  std::string planted = "node,t\n";
  for (std::size_t i = 0; i < inst.planted_temperature.size(); ++i) {
    planted += std::to_string(i) + "," + io::format_double(inst.planted_temperature[i]) + "\n";
  }
  io::write_atomic(out_dir / "planted_temperatures.csv", planted);
  return inst;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

// Pools bin counts across runs; accuracy/confidence become count-weighted.
CalibrationReport pooled(const std::vector<CalibrationReport>& runs) {
  CalibrationReport out = runs.front();
  for (auto& b : out.bins) {
    b.accuracy *= static_cast<double>(b.count);
    b.confidence *= static_cast<double>(b.count);
  }
  for (auto& b : out.degree_bins) {
    b.accuracy *= static_cast<double>(b.count);
    b.confidence *= static_cast<double>(b.count);
    b.ece *= static_cast<double>(b.count);
  }
  for (std::size_t r = 1; r < runs.size(); ++r) {
    for (std::size_t m = 0; m < out.bins.size(); ++m) {
      const auto& b = runs[r].bins[m];
      out.bins[m].count += b.count;
      out.bins[m].accuracy += b.accuracy * static_cast<double>(b.count);
      out.bins[m].confidence += b.confidence * static_cast<double>(b.count);
    }
    if (runs[r].degree_bins.size() != out.degree_bins.size()) continue;
    for (std::size_t m = 0; m < out.degree_bins.size(); ++m) {
      const auto& b = runs[r].degree_bins[m];
      out.degree_bins[m].count += b.count;
      out.degree_bins[m].accuracy += b.accuracy * static_cast<double>(b.count);
      out.degree_bins[m].confidence += b.confidence * static_cast<double>(b.count);
      out.degree_bins[m].ece += b.ece * static_cast<double>(b.count);
    }
  }
  auto normalize = [](auto& b) {
    if (b.count == 0) return;
    b.accuracy /= static_cast<double>(b.count);
    b.confidence /= static_cast<double>(b.count);
  };
  for (auto& b : out.bins) normalize(b);
  for (auto& b : out.degree_bins) {
    normalize(b);
    if (b.count) b.ece /= static_cast<double>(b.count);
  }
  return out;
}

}  // namespace

ReportOutcome cmd_report(const std::vector<fs::path>& reports, const fs::path& out_dir) {
  if (reports.empty()) throw InputError("report needs at least one report file");
  std::vector<std::string> order;
  std::map<std::string, std::vector<CalibrationReport>> by_method;
  std::optional<std::size_t> num_bins;

  auto add = [&](CalibrationReport r, const fs::path& path) {
    if (num_bins && *num_bins != r.num_bins) {
      throw InputError("incompatible reports: " + path.string() + " uses " +
                       std::to_string(r.num_bins) + " bins, expected " +
                       std::to_string(*num_bins));
    }
    num_bins = r.num_bins;
    if (!by_method.count(r.method_tag)) order.push_back(r.method_tag);
    by_method[r.method_tag].push_back(std::move(r));
  };

  for (const auto& path : reports) {
    require_file(path, "report");
    try {
      const json j = json::parse(io::read_file(path));
      if (j.contains("calibrated")) {
        auto cal = io::report_from_json(j.at("calibrated"));
        const bool same = cal.method_tag == "Uncalibrated";
        add(std::move(cal), path);
        if (!same && j.contains("uncalibrated")) {
          add(io::report_from_json(j.at("uncalibrated")), path);
        }
      } else {
        add(io::report_from_json(j), path);
      }
    } catch (const json::exception& e) {
      throw InputError("malformed report " + path.string() + ": " + e.what());
    }
  }

  ReportOutcome out;
  std::string csv = "method,runs,ece_mean,ece_std,nll_mean,nll_std,accuracy_mean,accuracy_std\n";
  out.table = pad("method", 14) + pad("runs", 6) + pad("ECE", 20) + pad("NLL", 20) + "Accuracy\n";
  for (const auto& tag : order) {
    const auto& runs = by_method[tag];
    std::vector<double> e, n, a;
    for (const auto& r : runs) {
      e.push_back(r.ece);
      n.push_back(r.nll);
      a.push_back(r.accuracy);
    }
    MethodSummary s;
    s.method_tag = tag;
    s.runs = runs.size();
    std::tie(s.ece_mean, s.ece_std) = mean_std(e);
    std::tie(s.nll_mean, s.nll_std) = mean_std(n);
    std::tie(s.accuracy_mean, s.accuracy_std) = mean_std(a);
    out.methods.push_back(s);

    csv += tag + "," + std::to_string(s.runs) + "," + io::format_double(s.ece_mean) + "," +
           io::format_double(s.ece_std) + "," + io::format_double(s.nll_mean) + "," +
           io::format_double(s.nll_std) + "," + io::format_double(s.accuracy_mean) + "," +
           io::format_double(s.accuracy_std) + "\n";
    out.table += pad(tag, 14) + pad(std::to_string(s.runs), 6) +
                 pad(fixed(s.ece_mean) + " ± " + fixed(s.ece_std), 20) +
                 pad(fixed(s.nll_mean) + " ± " + fixed(s.nll_std), 20) + fixed(s.accuracy_mean) +
                 " ± " + fixed(s.accuracy_std) + "\n";

    const auto merged = pooled(runs);
    io::write_atomic(out_dir / ("reliability_" + tag + ".csv"), io::reliability_csv(merged));
    io::write_atomic(out_dir / ("degree_bins_" + tag + ".csv"), io::degree_bins_csv(merged));
  }
  io::write_atomic(out_dir / "summary.csv", csv);
  io::write_atomic(out_dir / "summary.txt", out.table);
  return out;
}

SweepOutcome cmd_sweep(const RunConfig& cfg, const std::vector<std::size_t>& k_list,
                       const std::vector<double>& s_list,
                       const std::set<std::pair<std::size_t, double>>& fail_cells) {
  if (k_list.empty() || s_list.empty()) throw InputError("sweep needs non-empty k and s lists");
  const auto [g, data] = load_inputs(cfg);
  const auto l_hat = rescale_laplacian(sym_normalized_laplacian(g), cfg.wavelet.lambda_max);
  const auto x0 = seed_signal(g, cfg.wavelet);
  const auto seeds = cfg.seed_list();

  SweepOutcome out;
  std::string csv = "k,s,ece_mean,ece_std\n";
  for (std::size_t k : k_list) {
    std::vector<std::vector<double>> terms;
    try {
      terms = chebyshev_terms(l_hat, x0, k);
    } catch (const std::exception& e) {
      std::cerr << "warning: k=" << k << " failed: " << e.what() << "\n";
    }
    for (double s : s_list) {
      SweepCell cell{k, s, 0.0, 0.0, false};
      try {
        if (fail_cells.count({k, s})) throw NumericError("injected failure");
        if (terms.empty()) throw NumericError("Chebyshev terms unavailable");
        RunConfig run = cfg;
        run.method = Method::WATS;
        run.wavelet.order_k = k;
        run.wavelet.scale_s = s;
        const auto h = assemble_features(terms, heat_coefficients(run.wavelet));
        std::vector<double> eces;
        for (std::uint64_t seed : seeds) {
          run.seed = seed;
          eces.push_back(run_calibration(g, data, &h, run).calibrated.ece);
        }
        std::tie(cell.ece_mean, cell.ece_std) = mean_std(eces);
      } catch (const std::exception& e) {
        cell.failed = true;
        ++out.warnings;
        std::cerr << "warning: sweep cell k=" << k << " s=" << s << " failed: " << e.what()
                  << "\n";
      }
      csv += std::to_string(k) + "," + io::format_double(s) + "," +
             (cell.failed ? std::string("nan,nan")
                          : io::format_double(cell.ece_mean) + "," +
                                io::format_double(cell.ece_std)) +
             "\n";
      if (!cell.failed && (!out.best || cell.ece_mean < out.best->ece_mean)) out.best = cell;
      out.cells.push_back(cell);
    }
  }
  out.best_in_k3_k4 = out.best && (out.best->k == 3 || out.best->k == 4);

  json summary = {{"cells", out.cells.size()}, {"failed", out.warnings}};
  if (out.best) {
    summary["best"] = {{"k", out.best->k}, {"s", out.best->s}, {"ece_mean", out.best->ece_mean}};
    summary["best_in_k3_k4"] = out.best_in_k3_k4;
  }
  io::write_atomic(cfg.output_dir / "sweep.csv", csv);
  io::write_atomic(cfg.output_dir / "sweep_summary.json", summary.dump(2) + "\n");
  return out;
}

}  // namespace wats::cli
