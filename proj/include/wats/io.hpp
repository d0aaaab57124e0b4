#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "wats/calibrator.hpp"
#include "wats/common.hpp"
#include "wats/graph.hpp"
#include "wats/metrics.hpp"
#include "wats/wavelet.hpp"

namespace wats::io {

namespace fs = std::filesystem;

// Writes to a sibling temp file and renames it into place.
void write_atomic(const fs::path& path, const std::string& contents);
std::string read_file(const fs::path& path);

// %.17g: parses back to the identical double.
std::string format_double(double v);

Graph read_edge_list(const fs::path& path);
std::string edge_list_text(const Graph& g);

// No header; one row of comma-separated logits per node.
Matrix read_logits(const fs::path& path);
std::string logits_text(const Matrix& logits);

// One integer class index per line.
std::vector<std::size_t> read_labels(const fs::path& path);
std::string labels_text(const std::vector<std::size_t>& labels);

// {"train": [...], "val": [...], "test": [...]}
Split read_split(const fs::path& path);
std::string split_text(const Split& split);

// Header "node,h0,...,hK".
std::string features_csv(const WaveletFeatures& h);
WaveletFeatures read_features_csv(const fs::path& path);

nlohmann::json to_json(const CalibratorParams& params, const WaveletConfig& wavelet);
CalibratorParams calibrator_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CalibrationReport& report);
CalibrationReport report_from_json(const nlohmann::json& j);

// "bin_lo,bin_hi,count,accuracy,confidence"
std::string reliability_csv(const CalibrationReport& report);
// "degree_lo,degree_hi,count,accuracy,confidence,ece"
std::string degree_bins_csv(const CalibrationReport& report);

}  // namespace wats::io
