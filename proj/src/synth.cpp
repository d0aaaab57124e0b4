#include "wats/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace wats {

void SyntheticSpec::validate() const {
  if (num_nodes < 2) throw InputError("synthetic graph needs at least two nodes");
  if (num_classes < 2) throw InputError("num_classes must be >= 2");
  if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0)) {
    throw InputError("SBM probabilities must lie in [0, 1]");
  }
  if (model == GraphModel::SBM && num_classes > num_nodes) {
    throw InputError("more SBM blocks than nodes");
  }
  if (model == GraphModel::BarabasiAlbert && (attachment < 1 || attachment >= num_nodes)) {
    throw InputError("attachment count must lie in [1, num_nodes)");
  }
  if (!(logit_margin > 0.0)) throw InputError("logit margin must be positive");
  if (!(noise_ratio > 0.0)) throw InputError("noise ratio must be positive");
  if (!(profile_strength >= 0.0)) throw InputError("profile strength must be non-negative");
}

double planted_temperature(std::size_t degree, double strength) {
  return 1.0 + strength / (1.0 + static_cast<double>(degree));
}

namespace {

double unit_open(std::mt19937_64& rng) {
  // (0, 1]: safe for log().
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

// Appends Bernoulli(p) edges (i, j) for j in [lo, hi) using geometric skips.
void sample_segment(std::size_t i, std::size_t lo, std::size_t hi, double p,
                    std::mt19937_64& rng, std::vector<Edge>& edges) {
  if (p <= 0.0 || lo >= hi) return;
  if (p >= 1.0) {
    for (std::size_t j = lo; j < hi; ++j) edges.emplace_back(i, j);
    return;
  }
  const double log_q = std::log1p(-p);
  std::size_t j = lo;
  while (true) {
    const double skip = std::floor(std::log(unit_open(rng)) / log_q);
    if (skip >= static_cast<double>(hi - j)) return;
    j += static_cast<std::size_t>(skip);
    edges.emplace_back(i, j);
    if (++j >= hi) return;
  }
}

}  // namespace

Graph generate_sbm(std::size_t num_nodes, std::size_t num_blocks, double p_in, double p_out,
                   std::uint64_t seed, std::vector<std::size_t>* block_of) {
  if (num_blocks < 1 || num_blocks > num_nodes) throw InputError("invalid SBM block count");
  // Contiguous, near-equal blocks.
  std::vector<std::size_t> starts(num_blocks + 1);
  for (std::size_t b = 0; b <= num_blocks; ++b) starts[b] = b * num_nodes / num_blocks;
  std::vector<std::size_t> block(num_nodes);
  for (std::size_t b = 0; b < num_blocks; ++b) {
    for (std::size_t i = starts[b]; i < starts[b + 1]; ++i) block[i] = b;
  }

  std::mt19937_64 rng(seed);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const std::size_t b = block[i];
    sample_segment(i, i + 1, starts[b + 1], p_in, rng, edges);
    sample_segment(i, starts[b + 1], num_nodes, p_out, rng, edges);
  }
  if (block_of) *block_of = std::move(block);
  return Graph::from_edges(num_nodes, edges);
}

Graph generate_barabasi_albert(std::size_t num_nodes, std::size_t attachment,
                               std::uint64_t seed) {
  if (attachment < 1 || attachment >= num_nodes) {
    throw InputError("attachment count must lie in [1, num_nodes)");
  }
  std::mt19937_64 rng(seed);
  std::vector<Edge> edges;
  edges.reserve(num_nodes * attachment);
  // Endpoint multiset: sampling uniformly from it is degree-proportional.
  std::vector<std::size_t> endpoints;
  endpoints.reserve(2 * num_nodes * attachment);

  // Seed clique over the first attachment + 1 nodes.
  const std::size_t core = attachment + 1;
  for (std::size_t i = 0; i < core; ++i) {
    for (std::size_t j = i + 1; j < core; ++j) {
      edges.emplace_back(i, j);
      endpoints.push_back(i);
      endpoints.push_back(j);
    }
  }
  std::vector<std::size_t> targets;
  for (std::size_t v = core; v < num_nodes; ++v) {
    targets.clear();
    while (targets.size() < attachment) {
      const std::size_t pick = endpoints[rng() % endpoints.size()];
      if (std::find(targets.begin(), targets.end(), pick) == targets.end()) {
        targets.push_back(pick);
      }
    }
    for (std::size_t t : targets) {
      edges.emplace_back(v, t);
      endpoints.push_back(v);
      endpoints.push_back(t);
    }
  }
  return Graph::from_edges(num_nodes, edges);
}

Split random_split(std::size_t num_nodes, std::uint64_t seed) {
  std::vector<std::size_t> order(num_nodes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_train = num_nodes / 5;
  const std::size_t n_val = num_nodes / 10;
  Split s;
  const auto mid = order.begin() + static_cast<std::ptrdiff_t>(n_train);
  const auto mid2 = mid + static_cast<std::ptrdiff_t>(n_val);
  s.train.assign(order.begin(), mid);
  s.val.assign(mid, mid2);
  s.test.assign(mid2, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

SyntheticInstance generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  // Independent streams for structure, labels, noise and split.
  std::seed_seq seq{spec.seed, spec.seed >> 32, std::uint64_t{0x5EED}};
  std::array<std::uint64_t, 4> seeds{};
  {
    std::array<std::uint32_t, 8> words{};
    seq.generate(words.begin(), words.end());
    for (std::size_t k = 0; k < 4; ++k) {
      seeds[k] = (std::uint64_t{words[2 * k]} << 32) | words[2 * k + 1];
    }
  }

  SyntheticInstance inst;
  const std::size_t n = spec.num_nodes;
  const std::size_t c = spec.num_classes;
  std::vector<std::size_t> labels(n);
  if (spec.model == GraphModel::SBM) {
    inst.graph = generate_sbm(n, c, spec.p_in, spec.p_out, seeds[0], &labels);
  } else {
    inst.graph = generate_barabasi_albert(n, spec.attachment, seeds[0]);
    std::mt19937_64 label_rng(seeds[1]);
    for (auto& y : labels) y = label_rng() % c;
  }

  std::mt19937_64 noise_rng(seeds[2]);
  std::normal_distribution<double> noise(0.0, spec.noise_ratio * spec.logit_margin);
  inst.clean_logits = Matrix(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      inst.clean_logits(i, k) = noise(noise_rng) + (k == labels[i] ? spec.logit_margin : 0.0);
    }
  }

  inst.planted_temperature.assign(n, 1.0);
  if (spec.miscal_profile == MiscalibrationProfile::DegreeUnderconfidence) {
    for (std::size_t i = 0; i < n; ++i) {
      inst.planted_temperature[i] =
          planted_temperature(inst.graph.degrees()[i], spec.profile_strength);
    }
  }

  inst.data.num_nodes = n;
  inst.data.num_classes = c;
  inst.data.logits = scale_logits(inst.clean_logits, inst.planted_temperature);
  inst.data.labels = std::move(labels);
  inst.data.split = random_split(n, seeds[3]);
  return inst;
}

std::string to_string(GraphModel model) {
  return model == GraphModel::SBM ? "sbm" : "barabasi-albert";
}

GraphModel parse_graph_model(const std::string& name) {
  if (name == "sbm" || name == "SBM") return GraphModel::SBM;
  if (name == "barabasi-albert" || name == "ba" || name == "BarabasiAlbert") {
    return GraphModel::BarabasiAlbert;
  }
  throw InputError("unknown graph model '" + name + "'");
}

std::string to_string(MiscalibrationProfile profile) {
  return profile == MiscalibrationProfile::None ? "none" : "degree-underconfidence";
}

MiscalibrationProfile parse_miscalibration_profile(const std::string& name) {
  if (name == "none" || name == "None") return MiscalibrationProfile::None;
  if (name == "degree-underconfidence" || name == "DegreeUnderconfidence") {
    return MiscalibrationProfile::DegreeUnderconfidence;
  }
  throw InputError("unknown miscalibration profile '" + name + "'");
}

}  // namespace wats
