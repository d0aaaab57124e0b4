#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wats/calibrator.hpp"
#include "wats/graph.hpp"

namespace wats {

enum class GraphModel { SBM, BarabasiAlbert };
enum class MiscalibrationProfile { None, DegreeUnderconfidence };

struct SyntheticSpec {
  std::size_t num_nodes = 2000;
  GraphModel model = GraphModel::SBM;
  // SBM: one equal-sized block per class.
  double p_in = 0.004;
  double p_out = 0.0004;
  // Barabasi-Albert: edges added per new node.
  std::size_t attachment = 3;
  std::size_t num_classes = 4;
  double logit_margin = 4.0;
  // Noise standard deviation as a fraction of the margin.
  double noise_ratio = 0.5;
  MiscalibrationProfile miscal_profile = MiscalibrationProfile::DegreeUnderconfidence;
  double profile_strength = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticInstance {
  Graph graph;
  LogitSet data;       // distorted logits, labels, split
  Matrix clean_logits;
  std::vector<double> planted_temperature;  // t(d_i); 1 under the None profile
};

// t(d) = 1 + strength / (1 + d).
double planted_temperature(std::size_t degree, double strength);

Graph generate_sbm(std::size_t num_nodes, std::size_t num_blocks, double p_in, double p_out,
                   std::uint64_t seed, std::vector<std::size_t>* block_of = nullptr);
Graph generate_barabasi_albert(std::size_t num_nodes, std::size_t attachment,
                               std::uint64_t seed);

// Seeded shuffle split of 0..n-1 into floor(0.2n) / floor(0.1n) / remainder,
// each part sorted ascending.
Split random_split(std::size_t num_nodes, std::uint64_t seed);

// Clean logits margin * onehot(y) + N(0, (noise_ratio * margin)^2), divided node-wise by
// t(d_i) under DegreeUnderconfidence.
SyntheticInstance generate_synthetic(const SyntheticSpec& spec);

std::string to_string(GraphModel model);
GraphModel parse_graph_model(const std::string& name);
std::string to_string(MiscalibrationProfile profile);
MiscalibrationProfile parse_miscalibration_profile(const std::string& name);

}  // namespace wats
