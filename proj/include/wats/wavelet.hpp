#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wats/common.hpp"
#include "wats/graph.hpp"

namespace wats {

enum class CoefficientScheme {
  ExpIndex,        // alpha_k = exp(-s k)
  ChebyshevExact,  // Chebyshev expansion of the heat kernel exp(-s lambda)
};

enum class SeedSignal { LogDegree, Custom };

std::string to_string(CoefficientScheme scheme);
CoefficientScheme parse_coefficient_scheme(const std::string& name);

struct WaveletConfig {
  std::size_t order_k = 3;
  double scale_s = 0.8;
  CoefficientScheme coeff_scheme = CoefficientScheme::ExpIndex;
  SeedSignal seed_signal = SeedSignal::LogDegree;
  double lambda_max = 2.0;
  // Used when seed_signal == Custom; must have one entry per node.
  std::vector<double> custom_seed;

  void validate() const;
};

// Row-normalized structural features: N x (K+1).
struct WaveletFeatures {
  std::size_t num_nodes = 0;
  std::size_t order_k = 0;
  Matrix values;
  std::vector<double> raw_norms;

  std::size_t width() const { return order_k + 1; }
};

// T_0 = x0, T_1 = L x0, T_k = 2 L T_{k-1} - T_{k-2}. K mat-vecs in total.
std::vector<std::vector<double>> chebyshev_terms(const SparseOperator& l_hat,
                                                 std::span<const double> x0,
                                                 std::size_t order_k);

// K+1 coefficients; for ChebyshevExact the k=0 entry already carries the 1/2.
std::vector<double> heat_coefficients(const WaveletConfig& cfg);

// ln(1 + d_i) for LogDegree; the custom vector otherwise.
std::vector<double> seed_signal(const Graph& g, const WaveletConfig& cfg);

// Column k of the pre-normalization matrix is coeffs[k] * terms[k]; each row
// is then divided by its l1 norm (zero rows stay zero).
WaveletFeatures assemble_features(const std::vector<std::vector<double>>& terms,
                                  std::span<const double> coeffs);

// Full pipeline: L_sym, rescale, seed, recurrence, coefficients, assemble.
WaveletFeatures wavelet_features(const Graph& g, const WaveletConfig& cfg);

// sum_k coeffs[k] * terms[k]: the single-vector filter response. With
// ChebyshevExact coefficients this approximates Psi_s x0.
std::vector<double> filtered_signal(const std::vector<std::vector<double>>& terms,
                                    std::span<const double> coeffs);

// Exact U diag(exp(-s lambda)) U^T from a dense eigendecomposition of L_sym.
// Refuses graphs above kDenseOracleLimit nodes.
inline constexpr std::size_t kDenseOracleLimit = 2000;
Matrix dense_wavelet_oracle(const Graph& g, double s);

}  // namespace wats
