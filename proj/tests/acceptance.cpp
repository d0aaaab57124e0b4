// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Every tolerance and budget lives in the constants below.

#include <Eigen/Dense>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "wats/commands.hpp"
#include "wats/io.hpp"

using namespace wats;
namespace fs = std::filesystem;

namespace {

constexpr double kSpectralTol = 1e-3;      // AC-1
constexpr double kSpectralBudget = 30.0;   // s
constexpr double kRecurrenceTol = 1e-9;    // AC-2
constexpr double kRecurrenceBudget = 5.0;
constexpr double kGradTol = 1e-4;          // AC-3
constexpr double kGradFloor = 1e-6;        // denominator floor for near-zero coordinates
constexpr double kGradStep = 1e-5;
constexpr double kGradBudget = 10.0;
constexpr double kEceMonteCarloTol = 0.01;  // AC-4
constexpr double kRecoveryRatio = 0.6;     // AC-5
constexpr double kRecoveryBudget = 120.0;
constexpr double kSweepBudget = 600.0;     // AC-7
constexpr double kScaleBudget = 10.0;      // AC-8

const std::vector<double> kScales{0.1, 0.4, 0.8, 1.2, 1.6, 2.0, 2.5};
constexpr std::uint64_t kRecoverySeeds = 10;

int failures = 0;

void report(const char* id, bool pass, const std::string& detail, double seconds) {
  std::printf("%s %s  %s (%.2f s)\n", id, pass ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Graph random_graph(std::size_t n, double mean_degree, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(std::min(1.0, mean_degree / static_cast<double>(n - 1)));
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (coin(rng)) edges.emplace_back(i, j);
    }
  }
  return Graph::from_edges(n, edges);
}

Eigen::MatrixXd dense(const SparseOperator& op) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(op.dim(), op.dim());
  for (std::size_t i = 0; i < op.dim(); ++i) {
    for (std::size_t p = op.row_offsets()[i]; p < op.row_offsets()[i + 1]; ++p) {
      m(i, op.col_indices()[p]) = op.values()[p];
    }
  }
  return m;
}

void ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> size(10, 200);
  double worst = 0.0;
  std::size_t cases = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto g = random_graph(size(rng), 2.0 + rep % 5, rng);
    for (double s : kScales) {
      WaveletConfig cfg;
      cfg.order_k = 20;
      cfg.scale_s = s;
      cfg.coeff_scheme = CoefficientScheme::ChebyshevExact;
      const auto h = wavelet_features(g, cfg);
      const auto x0 = seed_signal(g, cfg);
      const auto psi = dense_wavelet_oracle(g, s);
      // Row sums of S (recovered from H and its row norms) against Psi_s x0.
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        double want = 0.0;
        for (std::size_t j = 0; j < g.num_nodes(); ++j) want += psi(i, j) * x0[j];
        double got = 0.0;
        for (double v : h.values.row(i)) got += v;
        got *= h.raw_norms[i];
        num += (got - want) * (got - want);
        den += want * want;
      }
      const double rel = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
      worst = std::max(worst, rel);
      ++cases;
    }
  }
  const double t = elapsed(t0);
  report("AC-1", worst <= kSpectralTol && t < kSpectralBudget,
         "Chebyshev (K=20) vs dense heat kernel: max relative l2 error " + fmt("%.3g", worst) +
             " over " + std::to_string(cases) + " graph/scale pairs, tol " +
             fmt("%.0e", kSpectralTol),
         t);
}

void ac2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> size(2, 50);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  std::size_t cases = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const auto g = random_graph(size(rng), 1.0 + rep % 6, rng);
    const auto l_hat = rescale_laplacian(sym_normalized_laplacian(g), 2.0);
    const Eigen::MatrixXd m = dense(l_hat);
    std::vector<double> x0(g.num_nodes());
    for (auto& v : x0) v = u(rng);
    for (std::size_t k = 1; k <= 8; ++k) {
      const auto terms = chebyshev_terms(l_hat, x0, k);
      const auto n = static_cast<Eigen::Index>(g.num_nodes());
      Eigen::MatrixXd prev = Eigen::MatrixXd::Identity(n, n), cur = m;
      for (std::size_t q = 0; q <= k; ++q) {
        Eigen::MatrixXd tq;
        if (q == 0) {
          tq = prev;
        } else if (q == 1) {
          tq = cur;
        } else {
          tq = 2.0 * m * cur - prev;
          prev = cur;
          cur = tq;
        }
        const Eigen::VectorXd want = tq * Eigen::Map<const Eigen::VectorXd>(x0.data(), n);
        const Eigen::VectorXd got = Eigen::Map<const Eigen::VectorXd>(terms[q].data(), n);
        const double rel = (got - want).norm() / std::max(want.norm(), 1e-300);
        worst = std::max(worst, want.norm() > 0 ? rel : (got - want).norm());
        ++cases;
      }
    }
  }
  const double t = elapsed(t0);
  report("AC-2", worst <= kRecurrenceTol && t < kRecurrenceBudget,
         "recurrence vs dense matrix polynomials (N<=50, K<=8): max relative error " +
             fmt("%.3g", worst) + " over " + std::to_string(cases) + " terms",
         t);
}

void ac3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(303);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  std::size_t coords = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t nodes = 2 + rng() % 15;    // <= 16
    const std::size_t classes = 2 + rng() % 4;   // <= 5
    const std::size_t hidden = 1 + rng() % 8;    // <= 8
    const std::size_t k = 1 + rng() % 5;
    WaveletFeatures h;
    h.num_nodes = nodes;
    h.order_k = k;
    h.values = Matrix(nodes, k + 1);
    for (auto& v : h.values.data()) v = u(rng);
    h.raw_norms.assign(nodes, 1.0);
    Matrix z(nodes, classes);
    for (auto& v : z.data()) v = n(rng);
    std::vector<std::size_t> y(nodes);
    for (auto& v : y) v = rng() % classes;
    std::vector<std::size_t> subset(nodes);
    std::iota(subset.begin(), subset.end(), 0);
    const double wd = rep % 3 == 0 ? 1e-3 : 0.0;
    auto p = CalibratorParams::initialize(k + 1, hidden, rep % 4 == 0 ? 0.3 : 0.0, rep);
    p.b2 = 0.5 * u(rng);
    Matrix mask;
    if (p.dropout_rate > 0) mask = sample_dropout_mask(nodes, hidden, p.dropout_rate, rng);
    const Matrix* mp = mask.rows() ? &mask : nullptr;

    const auto lg = wats_loss_gradient(p, h, z, y, subset, wd, mp);
    const auto theta = p.flatten();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      auto up = theta, dn = theta;
      up[j] += kGradStep;
      dn[j] -= kGradStep;
      auto pu = p, pd = p;
      pu.assign(up);
      pd.assign(dn);
      const double fd = (wats_loss_gradient(pu, h, z, y, subset, wd, mp).loss -
                         wats_loss_gradient(pd, h, z, y, subset, wd, mp).loss) /
                        (2 * kGradStep);
      const double a = lg.gradient[j];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), kGradFloor});
      worst = std::max(worst, rel);
      ++coords;
    }
  }
  const double t = elapsed(t0);
  report("AC-3", worst <= kGradTol && t < kGradBudget,
         "analytic vs central-difference gradients on 100 instances: max relative error " +
             fmt("%.3g", worst) + " over " + std::to_string(coords) + " coordinates",
         t);
}

void ac4() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto hand = ece(std::vector<double>{0.95, 0.55, 0.65}, {true, false, true}, 10);
  const bool hand_ok = std::abs(hand.ece - 0.95 / 3.0) <= 1e-15 &&
                       std::round(hand.ece * 1e4) / 1e4 == 0.3167;

  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool identity_ok = true;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng() % 500;
    std::vector<double> c(n);
    std::vector<bool> ok(n);
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = u(rng);
      ok[i] = u(rng) < 0.6;
    }
    const auto r = ece(c, ok, 1 + rng() % 20);
    identity_ok = identity_ok && r.ece == ece_from_bins(r.bins, n);
  }

  // Perfectly calibrated stream: correct ~ Bernoulli(confidence).
  const std::size_t samples = 100000;
  std::vector<double> c(samples);
  std::vector<bool> ok(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    c[i] = 0.25 + 0.75 * u(rng);
    ok[i] = u(rng) < c[i];
  }
  const double mc = ece(c, ok, 10).ece;
  const double t = elapsed(t0);
  report("AC-4", hand_ok && identity_ok && mc <= kEceMonteCarloTol,
         "hand example " + fmt("%.4f", hand.ece) + ", bin identity " +
             (identity_ok ? "exact" : "broken") + ", Monte-Carlo ECE " + fmt("%.4f", mc) +
             " on 1e5 samples",
         t);
}

struct Recovery {
  double uncal = 0, ts = 0, wats = 0, oracle = 0;
  bool predictions_preserved = true;
  std::size_t calibrations = 0;
  std::size_t wats_beats_ts = 0;
};

cli::RunConfig run_config(const fs::path& data, const fs::path& out, std::uint64_t seed) {
  cli::RunConfig cfg;
  cfg.edges = data / "edges.tsv";
  cfg.logits = data / "logits.csv";
  cfg.labels = data / "labels.txt";
  cfg.split = data / "split.json";
  cfg.output_dir = out;
  cfg.seed = seed;
  return cfg;
}

SyntheticSpec recovery_spec(std::uint64_t seed) {
  SyntheticSpec spec;  // SBM, N=2000, DegreeUnderconfidence, strength 3
  spec.num_nodes = 2000;
  spec.profile_strength = 3.0;
  spec.seed = seed;
  return spec;
}

// Synthesizes and calibrates all ten seeds under root, through the file-based commands.
Recovery run_recovery(const fs::path& root) {
  Recovery r;
  for (std::uint64_t seed = 0; seed < kRecoverySeeds; ++seed) {
    const auto data = root / ("seed" + std::to_string(seed)) / "data";
    const auto inst = cli::cmd_synth(recovery_spec(seed), data);
    double ts_ece = 0, wats_ece = 0;
    for (auto method : {cli::Method::TS, cli::Method::WATS}) {
      auto cfg = run_config(data, data.parent_path() / cli::to_string(method), seed);
      cfg.method = method;
      const auto out = cli::cmd_calibrate(cfg);
      (method == cli::Method::TS ? ts_ece : wats_ece) = out.calibrated.ece;
      if (method == cli::Method::TS) r.uncal += out.uncalibrated.ece;
      r.predictions_preserved = r.predictions_preserved &&
                                out.predictions_before == out.predictions_after &&
                                out.calibrated.accuracy == out.uncalibrated.accuracy;
      ++r.calibrations;
    }
    r.ts += ts_ece;
    r.wats += wats_ece;
    r.wats_beats_ts += wats_ece < ts_ece;
    const auto& d = inst.data;
    r.oracle += evaluate(inst.graph, inst.clean_logits, d.labels, d.split.test, 10,
                         default_degree_edges(), "oracle")
                    .ece;
  }
  const double n = static_cast<double>(kRecoverySeeds);
  r.uncal /= n;
  r.ts /= n;
  r.wats /= n;
  r.oracle /= n;
  return r;
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ac5_6(const fs::path& scratch) {
  unsetenv("WATS_THREADS");
  auto t0 = std::chrono::steady_clock::now();
  const auto r = run_recovery(scratch / "run1");
  const double t = elapsed(t0);
  const bool ordered = r.wats < r.ts && r.ts < r.uncal;
  report("AC-5", ordered && r.wats <= kRecoveryRatio * r.uncal && t < kRecoveryBudget,
         "mean test ECE over 10 seeds: WATS " + fmt("%.4f", r.wats) + " < TS " +
             fmt("%.4f", r.ts) + " < uncalibrated " + fmt("%.4f", r.uncal) + ", ratio " +
             fmt("%.3f", r.wats / r.uncal) + " (<= " + fmt("%.1f", kRecoveryRatio) +
             "); WATS below TS on " + std::to_string(r.wats_beats_ts) +
             "/10 seeds; planted-oracle ECE " + fmt("%.4f", r.oracle),
         t);

  report("AC-6", r.predictions_preserved,
         "test predictions and accuracy bit-identical before/after in " +
             std::to_string(r.calibrations) + " calibrations",
         0.0);
}

void ac9(const fs::path& scratch) {
  unsetenv("WATS_THREADS");
  const auto t0 = std::chrono::steady_clock::now();
  run_recovery(scratch / "run2");
  const auto a = files_under(scratch / "run1");
  const auto b = files_under(scratch / "run2");
  std::size_t identical = 0;
  bool same = a == b;
  for (const auto& f : a) {
    if (same && io::read_file(scratch / "run1" / f) == io::read_file(scratch / "run2" / f)) {
      ++identical;
    } else {
      same = false;
    }
  }
  report("AC-9", same && !a.empty(),
         "sequential rerun: " + std::to_string(identical) + "/" + std::to_string(a.size()) +
             " output files byte-identical",
         elapsed(t0));
}

void ac7(const fs::path& scratch) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = scratch / "run1" / "seed0" / "data";
  auto cfg = run_config(data, scratch / "sweep", 0);
  cfg.seeds.resize(kRecoverySeeds);
  std::iota(cfg.seeds.begin(), cfg.seeds.end(), std::uint64_t{0});
  const auto out = cli::cmd_sweep(cfg, cli::kSweepOrders, cli::kSweepScales);
  std::size_t finite = 0;
  for (const auto& c : out.cells) finite += !c.failed && std::isfinite(c.ece_mean);
  const double t = elapsed(t0);
  std::string detail = std::to_string(finite) + "/28 finite cells";
  if (out.best) {
    detail += fmt(", minimum ECE %.4f at k=%g s=%g", out.best->ece_mean,
                  static_cast<double>(out.best->k), out.best->s);
    detail += out.best_in_k3_k4 ? " (inside k in {3,4})" : " (outside k in {3,4})";
  }
  report("AC-7", out.cells.size() == 28 && finite == 28 && out.best && t < kSweepBudget, detail,
         t);
}

void ac8() {
  unsetenv("WATS_THREADS");
  const auto g = generate_barabasi_albert(100000, 10, 808);
  WaveletConfig cfg;
  cfg.order_k = 4;
  const auto t0 = std::chrono::steady_clock::now();
  const auto h = wavelet_features(g, cfg);
  const double t = elapsed(t0);
  report("AC-8", t < kScaleBudget && h.values.rows() == 100000,
         "BA graph |V|=100000 |E|=" + std::to_string(g.num_edges()) +
             ", K=4 features single-threaded in " + fmt("%.3f", t) + " s (budget " +
             fmt("%.0f", kScaleBudget) + " s)",
         t);
}

}  // namespace

int main() {
  const auto scratch = fs::temp_directory_path() / ("wats_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(scratch);
  try {
    ac1();
    ac2();
    ac3();
    ac4();
    ac5_6(scratch);
    ac7(scratch);
    ac8();
    ac9(scratch);
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    ++failures;
  }
  fs::remove_all(scratch);
  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
