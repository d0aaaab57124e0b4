#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wats/common.hpp"
#include "wats/graph.hpp"

namespace wats {

struct Prediction {
  std::vector<std::size_t> labels;
  std::vector<double> confidences;
};

// Row-wise stable softmax argmax / max. Ties go to the lowest class index.
Prediction predict(const Matrix& logits);

// Row-wise softmax probabilities (max-subtracted).
Matrix softmax_rows(const Matrix& logits);

struct BinStats {
  std::size_t bin_index = 0;  // 1-based
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

struct EceResult {
  double ece = 0.0;
  std::vector<BinStats> bins;
};

// Equal-width bins ((m-1)/M, m/M]; confidence 0 lands in bin 1.
EceResult ece(std::span<const double> confidences, const std::vector<bool>& correct,
              std::size_t num_bins);

// sum_m (count_m / total) |acc_m - conf_m|, accumulated in bin order.
double ece_from_bins(std::span<const BinStats> bins, std::size_t total);

// Mean of -log softmax(z_i)[y_i] over subset.
double nll(const Matrix& logits, std::span<const std::size_t> labels,
           std::span<const std::size_t> subset);

inline constexpr double kUnboundedDegree = std::numeric_limits<double>::infinity();
std::vector<double> default_degree_edges();

struct DegreeBinStats {
  double degree_lo = 0.0;
  double degree_hi = 0.0;  // infinity for the open last bin
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
  double ece = 0.0;
};

// Bins [e_j, e_{j+1}); a finite last edge opens a final bin [e_last, inf).
// Nodes with degree below edges.front() are not counted. Per-bin ECE uses 10
// confidence bins. `nodes` selects which graph nodes the confidence/correct
// entries belong to (entry t describes node nodes[t]).
std::vector<DegreeBinStats> degree_binned_report(const Graph& g,
                                                 std::span<const std::size_t> nodes,
                                                 std::span<const double> confidences,
                                                 const std::vector<bool>& correct,
                                                 std::span<const double> edges);

// Whole-graph variant: confidences/correct have one entry per node.
std::vector<DegreeBinStats> degree_binned_report(const Graph& g,
                                                 std::span<const double> confidences,
                                                 const std::vector<bool>& correct,
                                                 std::span<const double> edges);

// One-hop estimate |y_i - (1/(d_i+1)) sum_{j in N(i)} y_j| for binary label
// indicators.
std::vector<double> one_hop_bias(const Graph& g, const std::vector<bool>& labels_binary);

// The quantity the estimate approximates: |c_i - 1(correct_i)| with
// c_i = (1/(d_i+1)) sum_{j in {i} + N(i)} y_j.
std::vector<double> one_hop_bias_exact(const Graph& g, const std::vector<bool>& labels_binary,
                                       const std::vector<bool>& correct);

struct CalibrationReport {
  std::string method_tag;
  double ece = 0.0;
  double nll = 0.0;
  double accuracy = 0.0;
  std::size_t num_bins = 10;
  std::size_t num_nodes = 0;
  std::vector<BinStats> bins;
  std::vector<DegreeBinStats> degree_bins;
  std::string config_echo;
};

// Evaluates calibrated logits on `nodes`: predictions, ECE bins, NLL,
// accuracy and degree bins.
CalibrationReport evaluate(const Graph& g, const Matrix& logits,
                           std::span<const std::size_t> labels,
                           std::span<const std::size_t> nodes, std::size_t num_bins,
                           std::span<const double> degree_edges, std::string method_tag);

// Same, for methods that output probabilities directly (ETS).
CalibrationReport evaluate_probabilities(const Graph& g, const Matrix& probs,
                                         std::span<const std::size_t> labels,
                                         std::span<const std::size_t> nodes,
                                         std::size_t num_bins,
                                         std::span<const double> degree_edges,
                                         std::string method_tag);

}  // namespace wats
