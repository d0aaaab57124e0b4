#include "wats/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace wats {

std::string to_string(CoefficientScheme scheme) {
  return scheme == CoefficientScheme::ExpIndex ? "exp-index" : "chebyshev-exact";
}

CoefficientScheme parse_coefficient_scheme(const std::string& name) {
  if (name == "exp-index" || name == "ExpIndex") return CoefficientScheme::ExpIndex;
  if (name == "chebyshev-exact" || name == "ChebyshevExact") {
    return CoefficientScheme::ChebyshevExact;
  }
  throw InputError("unknown coefficient scheme '" + name + "'");
}

void WaveletConfig::validate() const {
  if (order_k < 1) throw InputError("Chebyshev order must be >= 1");
  if (!(scale_s > 0.0) || !std::isfinite(scale_s)) {
    throw InputError("diffusion scale must be positive");
  }
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) {
    throw InputError("lambda_max must be positive");
  }
}

std::vector<std::vector<double>> chebyshev_terms(const SparseOperator& l_hat,
                                                 std::span<const double> x0,
                                                 std::size_t order_k) {
  if (x0.size() != l_hat.dim()) {
    throw InputError("seed signal length " + std::to_string(x0.size()) +
                     " does not match operator dimension " + std::to_string(l_hat.dim()));
  }
  if (order_k < 1) throw InputError("Chebyshev order must be >= 1");

  const std::size_t n = x0.size();
  std::vector<std::vector<double>> terms;
  terms.reserve(order_k + 1);
  terms.emplace_back(x0.begin(), x0.end());
  terms.push_back(l_hat.apply(terms[0]));
  std::vector<double> lt(n);
  for (std::size_t k = 2; k <= order_k; ++k) {
    l_hat.apply(terms[k - 1], lt);
    const auto& prev2 = terms[k - 2];
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = 2.0 * lt[i] - prev2[i];
    terms.push_back(std::move(next));
  }
  return terms;
}

namespace {

// Gauss-Chebyshev estimate of (2/pi) int T_k(y) f(y) / sqrt(1-y^2) dy for
// k = 0..order with n nodes: (2/n) sum_j cos(k theta_j) f(cos theta_j).
template <typename F>
std::vector<double> gauss_chebyshev(F&& f, std::size_t order, std::size_t n) {
  std::vector<double> c(order + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double theta = (static_cast<double>(j) + 0.5) * std::numbers::pi / static_cast<double>(n);
    const double fy = f(std::cos(theta));
    for (std::size_t k = 0; k <= order; ++k) {
      c[k] += std::cos(static_cast<double>(k) * theta) * fy;
    }
  }
  for (double& v : c) v *= 2.0 / static_cast<double>(n);
  return c;
}

}  // namespace

std::vector<double> heat_coefficients(const WaveletConfig& cfg) {
  cfg.validate();
  const std::size_t order = cfg.order_k;
  std::vector<double> coeffs(order + 1);

  if (cfg.coeff_scheme == CoefficientScheme::ExpIndex) {
    for (std::size_t k = 0; k <= order; ++k) {
      coeffs[k] = std::exp(-cfg.scale_s * static_cast<double>(k));
    }
    return coeffs;
  }

  // Rescaled variable y in [-1, 1] maps back to lambda = (y + 1) lambda_max / 2.
  const double half_lmax = 0.5 * cfg.lambda_max;
  const double s = cfg.scale_s;
  auto heat = [s, half_lmax](double y) { return std::exp(-s * (y + 1.0) * half_lmax); };

  constexpr double kAbsTol = 1e-12;
  constexpr std::size_t kMaxNodes = std::size_t{1} << 20;
  std::size_t nodes = std::max<std::size_t>(32, 2 * (order + 1));
  auto current = gauss_chebyshev(heat, order, nodes);
  while (nodes < kMaxNodes) {
    nodes *= 2;
    auto refined = gauss_chebyshev(heat, order, nodes);
    double delta = 0.0;
    for (std::size_t k = 0; k <= order; ++k) {
      delta = std::max(delta, std::abs(refined[k] - current[k]));
    }
    current = std::move(refined);
    if (delta <= kAbsTol) break;
  }
  current[0] *= 0.5;
  return current;
}

std::vector<double> seed_signal(const Graph& g, const WaveletConfig& cfg) {
  if (cfg.seed_signal == SeedSignal::Custom) {
    if (cfg.custom_seed.size() != g.num_nodes()) {
      throw InputError("custom seed signal has length " + std::to_string(cfg.custom_seed.size()) +
                       ", expected " + std::to_string(g.num_nodes()));
    }
    return cfg.custom_seed;
  }
  std::vector<double> x0(g.num_nodes());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    x0[i] = std::log1p(static_cast<double>(g.degrees()[i]));
  }
  return x0;
}

WaveletFeatures assemble_features(const std::vector<std::vector<double>>& terms,
                                  std::span<const double> coeffs) {
  if (terms.size() < 2 || coeffs.size() != terms.size()) {
    throw InputError("need K+1 >= 2 terms with one coefficient each");
  }
  const std::size_t n = terms[0].size();
  const std::size_t width = terms.size();

  WaveletFeatures out;
  out.num_nodes = n;
  out.order_k = width - 1;
  out.values = Matrix(n, width);
  out.raw_norms.assign(n, 0.0);

  parallel_rows(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto row = out.values.row(i);
      double norm = 0.0;
      for (std::size_t k = 0; k < width; ++k) {
        row[k] = coeffs[k] * terms[k][i];
        norm += std::abs(row[k]);
      }
      out.raw_norms[i] = norm;
      if (norm > 0.0) {
        for (double& v : row) v /= norm;
      }
    }
  });
  return out;
}

WaveletFeatures wavelet_features(const Graph& g, const WaveletConfig& cfg) {
  cfg.validate();
  const auto l_hat = rescale_laplacian(sym_normalized_laplacian(g), cfg.lambda_max);
  const auto x0 = seed_signal(g, cfg);
  const auto terms = chebyshev_terms(l_hat, x0, cfg.order_k);
  const auto coeffs = heat_coefficients(cfg);
  return assemble_features(terms, coeffs);
}

std::vector<double> filtered_signal(const std::vector<std::vector<double>>& terms,
                                    std::span<const double> coeffs) {
  if (terms.empty() || coeffs.size() != terms.size()) {
    throw InputError("need one coefficient per Chebyshev term");
  }
  std::vector<double> out(terms[0].size(), 0.0);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeffs[k] * terms[k][i];
  }
  return out;
}

Matrix dense_wavelet_oracle(const Graph& g, double s) {
  const std::size_t n = g.num_nodes();
  if (n > kDenseOracleLimit) {
    throw InputError("dense wavelet oracle refuses " + std::to_string(n) + " nodes (limit " +
                     std::to_string(kDenseOracleLimit) + ")");
  }
  const Matrix l = sym_normalized_laplacian(g).to_dense();
  Eigen::MatrixXd dense(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = l(i, j);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Eigen::VectorXd filt = (-s * solver.eigenvalues().array()).exp();
  const Eigen::MatrixXd psi =
      solver.eigenvectors() * filt.asDiagonal() * solver.eigenvectors().transpose();

  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = psi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

}  // namespace wats
