// wats: wavelet-aware temperature scaling toolkit.
//
//   wats synth     --output-dir data/
//   wats features  --edges data/edges.tsv --output-dir out/
//   wats calibrate --edges ... --logits ... --labels ... --split ... --method wats
//   wats report    out/*/report.json --output-dir summary/
//   wats sweep     --edges ... --logits ... --labels ... --split ...
//
// Exit codes: 0 success, 1 runtime/numeric failure, 2 input/usage error.

#include <cstring>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "wats/commands.hpp"
#include "wats/io.hpp"

namespace {

using wats::cli::RunConfig;
namespace fs = std::filesystem;

// --config is applied before flag parsing so explicit flags win.
RunConfig initial_config(int argc, char** argv) {
  RunConfig cfg;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    std::string path;
    if (arg == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(std::strlen("--config="));
    }
    if (!path.empty()) {
      if (!fs::exists(path)) throw wats::InputError("config file not found: " + path);
      try {
        cfg = wats::cli::run_config_from_json(
            nlohmann::json::parse(wats::io::read_file(path)), cfg);
      } catch (const nlohmann::json::exception& e) {
        throw wats::InputError("malformed config " + path + ": " + e.what());
      }
    }
  }
  return cfg;
}

struct ConfigFlags {
  std::string scheme;
  std::string method;
  std::string optimizer;
};

void add_run_flags(CLI::App* cmd, RunConfig& cfg, ConfigFlags& extra, bool needs_logits) {
  cmd->add_option("--config", "JSON run config; explicit flags override it");
  cmd->add_option("--edges", cfg.edges, "edge list (src<TAB>dst)");
  if (needs_logits) {
    cmd->add_option("--logits", cfg.logits, "logit CSV, one row per node");
    cmd->add_option("--labels", cfg.labels, "labels, one class index per line");
    cmd->add_option("--split", cfg.split, "split JSON {train,val,test}");
  }
  cmd->add_option("--output-dir", cfg.output_dir, "output directory");
  cmd->add_option("--k", cfg.wavelet.order_k, "Chebyshev order");
  cmd->add_option("--s", cfg.wavelet.scale_s, "diffusion scale");
  cmd->add_option("--scheme", extra.scheme, "exp-index | chebyshev-exact");
  cmd->add_option("--lambda-max", cfg.wavelet.lambda_max, "Laplacian rescaling bound");
  if (!needs_logits) return;
  cmd->add_option("--method", extra.method, "wats | ts | ets | uncalibrated");
  cmd->add_option("--hidden-dim", cfg.hidden_dim, "MLP hidden width");
  cmd->add_option("--dropout", cfg.dropout, "dropout on the hidden layer");
  cmd->add_option("--seed", cfg.seed, "MLP init / dropout seed");
  cmd->add_option("--learning-rate", cfg.train.learning_rate);
  cmd->add_option("--max-epochs", cfg.train.max_epochs);
  cmd->add_option("--weight-decay", cfg.train.weight_decay);
  cmd->add_option("--patience", cfg.train.patience);
  cmd->add_option("--optimizer", extra.optimizer, "adam | gd");
  cmd->add_option("--num-bins", cfg.num_bins, "ECE bins");
  cmd->add_option("--degree-edges", cfg.degree_edges, "degree bin edges");
  cmd->add_option("--ts-min", cfg.ts_interval.lo, "global temperature search lower bound");
  cmd->add_option("--ts-max", cfg.ts_interval.hi, "global temperature search upper bound");
}

void apply_flags(RunConfig& cfg, const ConfigFlags& extra) {
  if (!extra.scheme.empty()) {
    cfg.wavelet.coeff_scheme = wats::parse_coefficient_scheme(extra.scheme);
  }
  if (!extra.method.empty()) cfg.method = wats::cli::parse_method(extra.method);
  if (extra.optimizer == "adam") cfg.train.optimizer = wats::Optimizer::Adam;
  if (extra.optimizer == "gd") cfg.train.optimizer = wats::Optimizer::PlainGD;
  if (!extra.optimizer.empty() && extra.optimizer != "adam" && extra.optimizer != "gd") {
    throw wats::InputError("unknown optimizer '" + extra.optimizer + "'");
  }
}

std::pair<std::size_t, double> parse_cell(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw wats::InputError("cell must be k:s, got " + text);
  return {std::stoul(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
}

int run(int argc, char** argv) {
  RunConfig cfg = initial_config(argc, argv);
  ConfigFlags extra;

  CLI::App app{"Wavelet-aware temperature scaling for graph node classifiers"};
  app.require_subcommand(1);

  auto* features = app.add_subcommand("features", "write wavelet features as CSV");
  add_run_flags(features, cfg, extra, false);

  auto* calibrate = app.add_subcommand("calibrate", "fit a calibrator and evaluate on test");
  add_run_flags(calibrate, cfg, extra, true);

  wats::SyntheticSpec spec;
  std::string model = "sbm";
  std::string profile = "degree-underconfidence";
  fs::path synth_dir = "synth";
  auto* synth = app.add_subcommand("synth", "generate a planted-miscalibration instance");
  synth->add_option("--num-nodes", spec.num_nodes);
  synth->add_option("--model", model, "sbm | barabasi-albert");
  synth->add_option("--p-in", spec.p_in, "SBM intra-block edge probability");
  synth->add_option("--p-out", spec.p_out, "SBM inter-block edge probability");
  synth->add_option("--attachment", spec.attachment, "BA edges per new node");
  synth->add_option("--num-classes", spec.num_classes);
  synth->add_option("--logit-margin", spec.logit_margin);
  synth->add_option("--noise-ratio", spec.noise_ratio, "noise sigma as a fraction of the margin");
  synth->add_option("--profile", profile, "none | degree-underconfidence");
  synth->add_option("--strength", spec.profile_strength);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--output-dir", synth_dir);

  std::vector<std::string> report_files;
  fs::path report_dir = "report";
  auto* report = app.add_subcommand("report", "aggregate report JSON files");
  report->add_option("reports", report_files, "report JSON files")->required();
  report->add_option("--output-dir", report_dir);

  std::vector<std::size_t> k_list = wats::cli::kSweepOrders;
  std::vector<double> s_list = wats::cli::kSweepScales;
  std::vector<std::string> inject;
  auto* sweep = app.add_subcommand("sweep", "grid over Chebyshev order and scale");
  add_run_flags(sweep, cfg, extra, true);
  sweep->add_option("--k-list", k_list, "Chebyshev orders")->delimiter(',');
  sweep->add_option("--s-list", s_list, "diffusion scales")->delimiter(',');
  sweep->add_option("--seeds", cfg.seeds, "seed list")->delimiter(',');
  sweep->add_option("--inject-fail", inject, "k:s cells forced to fail (testing)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  apply_flags(cfg, extra);

  if (*features) {
    const auto out = wats::cli::cmd_features(cfg);
    std::cout << "N=" << out.num_nodes << " K=" << out.order_k << " s=" << cfg.wavelet.scale_s
              << " scheme=" << wats::to_string(cfg.wavelet.coeff_scheme)
              << " time=" << out.seconds << "s -> " << out.csv.string() << "\n";
  } else if (*calibrate) {
    const auto out = wats::cli::cmd_calibrate(cfg);
    std::cout << "method=" << out.calibrated.method_tag << " test ECE "
              << out.uncalibrated.ece << " -> " << out.calibrated.ece << ", NLL "
              << out.uncalibrated.nll << " -> " << out.calibrated.nll
              << ", accuracy " << out.calibrated.accuracy << "\n";
  } else if (*synth) {
    spec.model = wats::parse_graph_model(model);
    spec.miscal_profile = wats::parse_miscalibration_profile(profile);
    const auto inst = wats::cli::cmd_synth(spec, synth_dir);
    std::cout << "nodes=" << inst.graph.num_nodes() << " edges=" << inst.graph.num_edges()
              << " classes=" << inst.data.num_classes << " -> " << synth_dir.string() << "\n";
  } else if (*report) {
    std::vector<fs::path> paths(report_files.begin(), report_files.end());
    std::cout << wats::cli::cmd_report(paths, report_dir).table;
  } else if (*sweep) {
    std::set<std::pair<std::size_t, double>> fail;
    for (const auto& c : inject) fail.insert(parse_cell(c));
    const auto out = wats::cli::cmd_sweep(cfg, k_list, s_list, fail);
    if (out.best) {
      std::cout << "best k=" << out.best->k << " s=" << out.best->s
                << " ECE=" << out.best->ece_mean
                << (out.best_in_k3_k4 ? " (k in {3,4})" : " (k outside {3,4})") << "\n";
    }
    if (out.warnings) std::cerr << out.warnings << " sweep cell(s) failed\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const wats::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
