#include "wats/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace wats {

namespace {

void require_finite_row(std::span<const double> row, std::size_t r) {
  for (double v : row) {
    if (!std::isfinite(v)) {
      throw InputError("non-finite logit in row " + std::to_string(r));
    }
  }
}

std::size_t argmax_lowest(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    require_finite_row(z, r);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    auto p = out.row(r);
    for (std::size_t c = 0; c < z.size(); ++c) {
      p[c] = std::exp(z[c] - zmax);
      sum += p[c];
    }
    for (double& v : p) v /= sum;
  }
  return out;
}

Prediction predict(const Matrix& logits) {
  if (logits.cols() < 2) throw InputError("need at least two classes");
  Prediction out;
  out.labels.resize(logits.rows());
  out.confidences.resize(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    require_finite_row(z, r);
    const std::size_t best = argmax_lowest(z);
    // max softmax = 1 / sum_c exp(z_c - z_max)
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - z[best]);
    out.labels[r] = best;
    out.confidences[r] = 1.0 / sum;
  }
  return out;
}

double ece_from_bins(std::span<const BinStats> bins, std::size_t total) {
  if (total == 0) return 0.0;
  double acc = 0.0;
  for (const auto& b : bins) {
    acc += static_cast<double>(b.count) / static_cast<double>(total) *
           std::abs(b.accuracy - b.confidence);
  }
  return acc;
}

EceResult ece(std::span<const double> confidences, const std::vector<bool>& correct,
              std::size_t num_bins) {
  if (num_bins < 1) throw InputError("ECE needs at least one bin");
  if (confidences.empty()) throw InputError("ECE needs at least one sample");
  if (confidences.size() != correct.size()) {
    throw InputError("confidence and correctness vectors differ in length");
  }

  const double m = static_cast<double>(num_bins);
  std::vector<double> conf_sum(num_bins, 0.0);
  std::vector<double> hit_sum(num_bins, 0.0);
  std::vector<std::size_t> counts(num_bins, 0);
  for (std::size_t t = 0; t < confidences.size(); ++t) {
    const double c = confidences[t];
    if (!(c >= 0.0 && c <= 1.0)) {
      throw InputError("confidence outside [0,1] at index " + std::to_string(t));
    }
    // 1-based bin b satisfies (b-1)/M < c <= b/M; correct any rounding in ceil.
    auto b = static_cast<std::size_t>(std::ceil(c * m));
    b = std::clamp<std::size_t>(b, 1, num_bins);
    while (b > 1 && c <= static_cast<double>(b - 1) / m) --b;
    while (b < num_bins && c > static_cast<double>(b) / m) ++b;
    conf_sum[b - 1] += c;
    hit_sum[b - 1] += correct[t] ? 1.0 : 0.0;
    ++counts[b - 1];
  }

  EceResult out;
  out.bins.resize(num_bins);
  for (std::size_t b = 0; b < num_bins; ++b) {
    auto& s = out.bins[b];
    s.bin_index = b + 1;
    s.lo = static_cast<double>(b) / m;
    s.hi = static_cast<double>(b + 1) / m;
    s.count = counts[b];
    if (counts[b] > 0) {
      s.accuracy = hit_sum[b] / static_cast<double>(counts[b]);
      s.confidence = conf_sum[b] / static_cast<double>(counts[b]);
    }
  }
  out.ece = ece_from_bins(out.bins, confidences.size());
  return out;
}

double nll(const Matrix& logits, std::span<const std::size_t> labels,
           std::span<const std::size_t> subset) {
  if (subset.empty()) throw InputError("NLL over an empty subset");
  double total = 0.0;
  for (std::size_t i : subset) {
    const auto z = logits.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    total += zmax + std::log(sum) - z[labels[i]];
  }
  return total / static_cast<double>(subset.size());
}

std::vector<double> default_degree_edges() {
  return {0, 2, 4, 8, 16, 32, 64, kUnboundedDegree};
}

std::vector<DegreeBinStats> degree_binned_report(const Graph& g,
                                                 std::span<const std::size_t> nodes,
                                                 std::span<const double> confidences,
                                                 const std::vector<bool>& correct,
                                                 std::span<const double> edges) {
  if (edges.empty()) throw InputError("degree bin edges are empty");
  for (std::size_t j = 1; j < edges.size(); ++j) {
    if (!(edges[j] > edges[j - 1])) throw InputError("degree bin edges must increase strictly");
  }
  if (nodes.size() != confidences.size() || nodes.size() != correct.size()) {
    throw InputError("degree report inputs differ in length");
  }

  std::vector<double> bounds(edges.begin(), edges.end());
  if (std::isfinite(bounds.back())) bounds.push_back(kUnboundedDegree);
  const std::size_t nbins = bounds.size() - 1;

  std::vector<std::vector<double>> conf(nbins);
  std::vector<std::vector<bool>> hit(nbins);
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    const auto d = static_cast<double>(g.degrees().at(nodes[t]));
    if (d < bounds.front()) continue;
    const auto it = std::upper_bound(bounds.begin(), bounds.end(), d);
    const auto b = static_cast<std::size_t>(it - bounds.begin()) - 1;
    conf[b].push_back(confidences[t]);
    hit[b].push_back(correct[t]);
  }

  std::vector<DegreeBinStats> out(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    auto& s = out[b];
    s.degree_lo = bounds[b];
    s.degree_hi = bounds[b + 1];
    s.count = conf[b].size();
    if (s.count == 0) continue;
    double csum = 0.0;
    double hsum = 0.0;
    for (std::size_t t = 0; t < s.count; ++t) {
      csum += conf[b][t];
      hsum += hit[b][t] ? 1.0 : 0.0;
    }
    s.accuracy = hsum / static_cast<double>(s.count);
    s.confidence = csum / static_cast<double>(s.count);
    s.ece = ece(conf[b], hit[b], 10).ece;
  }
  return out;
}

std::vector<DegreeBinStats> degree_binned_report(const Graph& g,
                                                 std::span<const double> confidences,
                                                 const std::vector<bool>& correct,
                                                 std::span<const double> edges) {
  std::vector<std::size_t> nodes(g.num_nodes());
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = i;
  return degree_binned_report(g, nodes, confidences, correct, edges);
}

namespace {

double neighbor_label_sum(const Graph& g, const std::vector<bool>& y, std::size_t i) {
  double s = 0.0;
  for (std::size_t j : g.neighbors(i)) s += y[j] ? 1.0 : 0.0;
  return s;
}

}  // namespace

std::vector<double> one_hop_bias(const Graph& g, const std::vector<bool>& labels_binary) {
  if (labels_binary.size() != g.num_nodes()) throw InputError("label vector length mismatch");
  std::vector<double> out(g.num_nodes());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double denom = static_cast<double>(g.degrees()[i]) + 1.0;
    const double yi = labels_binary[i] ? 1.0 : 0.0;
    out[i] = std::abs(yi - neighbor_label_sum(g, labels_binary, i) / denom);
  }
  return out;
}

std::vector<double> one_hop_bias_exact(const Graph& g, const std::vector<bool>& labels_binary,
                                       const std::vector<bool>& correct) {
  if (labels_binary.size() != g.num_nodes() || correct.size() != g.num_nodes()) {
    throw InputError("indicator vector length mismatch");
  }
  std::vector<double> out(g.num_nodes());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double denom = static_cast<double>(g.degrees()[i]) + 1.0;
    const double self = labels_binary[i] ? 1.0 : 0.0;
    const double conf = (self + neighbor_label_sum(g, labels_binary, i)) / denom;
    out[i] = std::abs(conf - (correct[i] ? 1.0 : 0.0));
  }
  return out;
}

namespace {

CalibrationReport summarize(const Graph& g, const Prediction& pred, double nll_value,
                            std::span<const std::size_t> labels,
                            std::span<const std::size_t> nodes, std::size_t num_bins,
                            std::span<const double> degree_edges, std::string method_tag) {
  if (nodes.empty()) throw InputError("evaluation set is empty");
  std::vector<double> conf(nodes.size());
  std::vector<bool> correct(nodes.size());
  std::size_t hits = 0;
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    conf[t] = pred.confidences[nodes[t]];
    correct[t] = pred.labels[nodes[t]] == labels[nodes[t]];
    hits += correct[t] ? 1 : 0;
  }
  auto e = ece(conf, correct, num_bins);

  CalibrationReport r;
  r.method_tag = std::move(method_tag);
  r.ece = e.ece;
  r.nll = nll_value;
  r.accuracy = static_cast<double>(hits) / static_cast<double>(nodes.size());
  r.num_bins = num_bins;
  r.num_nodes = nodes.size();
  r.bins = std::move(e.bins);
  r.degree_bins = degree_binned_report(g, nodes, conf, correct, degree_edges);
  return r;
}

}  // namespace

CalibrationReport evaluate(const Graph& g, const Matrix& logits,
                           std::span<const std::size_t> labels,
                           std::span<const std::size_t> nodes, std::size_t num_bins,
                           std::span<const double> degree_edges, std::string method_tag) {
  const auto pred = predict(logits);
  return summarize(g, pred, nll(logits, labels, nodes), labels, nodes, num_bins, degree_edges,
                   std::move(method_tag));
}

CalibrationReport evaluate_probabilities(const Graph& g, const Matrix& probs,
                                         std::span<const std::size_t> labels,
                                         std::span<const std::size_t> nodes,
                                         std::size_t num_bins,
                                         std::span<const double> degree_edges,
                                         std::string method_tag) {
  Prediction pred;
  pred.labels.resize(probs.rows());
  pred.confidences.resize(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto p = probs.row(r);
    pred.labels[r] = argmax_lowest(p);
    pred.confidences[r] = std::min(1.0, p[pred.labels[r]]);
  }
  if (nodes.empty()) throw InputError("evaluation set is empty");
  double total = 0.0;
  for (std::size_t i : nodes) {
    total -= std::log(std::max(probs(i, labels[i]), std::numeric_limits<double>::min()));
  }
  const double nll_value = total / static_cast<double>(nodes.size());
  return summarize(g, pred, nll_value, labels, nodes, num_bins, degree_edges,
                   std::move(method_tag));
}

}  // namespace wats
