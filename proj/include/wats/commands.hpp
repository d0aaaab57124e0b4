#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "wats/calibrator.hpp"
#include "wats/graph.hpp"
#include "wats/metrics.hpp"
#include "wats/synth.hpp"
#include "wats/wavelet.hpp"

namespace wats::cli {

namespace fs = std::filesystem;

enum class Method { WATS, TS, ETS, Uncalibrated };

std::string to_string(Method m);
Method parse_method(const std::string& name);

struct RunConfig {
  fs::path edges;
  fs::path logits;
  fs::path labels;
  fs::path split;
  fs::path output_dir = "out";

  WaveletConfig wavelet;
  TrainConfig train;
  std::size_t hidden_dim = 32;
  double dropout = 0.0;
  std::uint64_t seed = 0;
  // Seeds for multi-run commands (sweep); empty means {seed}.
  std::vector<std::uint64_t> seeds;

  std::size_t num_bins = 10;
  Method method = Method::WATS;
  std::vector<double> degree_edges = default_degree_edges();
  TemperatureInterval ts_interval;

  std::vector<std::uint64_t> seed_list() const;
};

// Fields absent from the JSON keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& cfg, bool include_paths = true);

struct FeaturesOutcome {
  std::size_t num_nodes = 0;
  std::size_t order_k = 0;
  double seconds = 0.0;
  fs::path csv;
};

// Writes <output_dir>/features.csv.
FeaturesOutcome cmd_features(const RunConfig& cfg);

struct CalibrationOutcome {
  CalibrationReport calibrated;
  CalibrationReport uncalibrated;
  nlohmann::json calibrator;            // method-specific parameters
  std::vector<double> temperatures;     // per node (WATS / TS); empty otherwise
  std::vector<std::size_t> predictions_before;  // argmax on the test split
  std::vector<std::size_t> predictions_after;
};

// Fits the configured method on the validation split and evaluates on test.
// `features` is required for WATS only.
CalibrationOutcome run_calibration(const Graph& g, const LogitSet& data,
                                   const WaveletFeatures* features, const RunConfig& cfg);

// Loads inputs, runs run_calibration and writes calibrator.json, report.json,
// reliability.csv, degree_bins.csv (and temperatures.csv for WATS/TS).
CalibrationOutcome cmd_calibrate(const RunConfig& cfg);

// Writes edges.tsv, logits.csv, labels.txt, split.json and
// planted_temperatures.csv under out_dir.
SyntheticInstance cmd_synth(const SyntheticSpec& spec, const fs::path& out_dir);

struct MethodSummary {
  std::string method_tag;
  std::size_t runs = 0;
  double ece_mean = 0.0, ece_std = 0.0;
  double nll_mean = 0.0, nll_std = 0.0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
};

struct ReportOutcome {
  std::vector<MethodSummary> methods;  // first-seen order
  std::string table;
};

// Aggregates report files (single reports or calibrate outputs holding a
// calibrated/uncalibrated pair). Writes summary.txt, summary.csv and per-method
// reliability_<tag>.csv / degree_bins_<tag>.csv into out_dir.
ReportOutcome cmd_report(const std::vector<fs::path>& reports, const fs::path& out_dir);

struct SweepCell {
  std::size_t k = 0;
  double s = 0.0;
  double ece_mean = 0.0;
  double ece_std = 0.0;
  bool failed = false;
};

struct SweepOutcome {
  std::vector<SweepCell> cells;
  std::size_t warnings = 0;
  std::optional<SweepCell> best;
  bool best_in_k3_k4 = false;
};

// WATS over the (k, s) grid with identical seeds. Chebyshev terms are computed
// once per k. Cells listed in fail_cells raise an injected error (tests).
// Writes sweep.csv ("k,s,ece_mean,ece_std") and sweep_summary.json.
SweepOutcome cmd_sweep(const RunConfig& cfg, const std::vector<std::size_t>& k_list,
                       const std::vector<double>& s_list,
                       const std::set<std::pair<std::size_t, double>>& fail_cells = {});

inline const std::vector<std::size_t> kSweepOrders{2, 3, 4, 5};
inline const std::vector<double> kSweepScales{0.1, 0.4, 0.8, 1.2, 1.6, 2.0, 2.5};

}  // namespace wats::cli
