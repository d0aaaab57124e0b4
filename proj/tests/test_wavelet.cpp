#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "wats/wavelet.hpp"

using namespace wats;

namespace {

Graph edges(const std::string& text, std::optional<std::size_t> n = std::nullopt) {
  std::istringstream in(text);
  return load_edge_list(in, n);
}

WaveletConfig config(std::size_t k, double s, CoefficientScheme scheme) {
  WaveletConfig cfg;
  cfg.order_k = k;
  cfg.scale_s = s;
  cfg.coeff_scheme = scheme;
  return cfg;
}

// Clenshaw-free reconstruction: sum_k c_k T_k(y) with T_k(y) = cos(k acos y).
double reconstruct(const std::vector<double>& c, double lambda) {
  const double y = std::clamp(lambda - 1.0, -1.0, 1.0);
  double v = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) v += c[k] * std::cos(k * std::acos(y));
  return v;
}

}  // namespace

TEST_CASE("recurrence with a zero operator") {
  SparseOperator zero(2, {0, 0, 0}, {}, {});
  auto t = chebyshev_terms(zero, std::vector<double>{1, 2}, 2);
  REQUIRE(t.size() == 3);
  CHECK(t[0] == std::vector<double>{1, 2});
  CHECK(t[1] == std::vector<double>{0, 0});
  CHECK(t[2] == std::vector<double>{-1, -2});
}

TEST_CASE("recurrence with the identity keeps x0") {
  std::vector<double> x0{0.3, -1.25, 7.0, 2.5};
  auto t = chebyshev_terms(SparseOperator::identity(4), x0, 3);
  for (const auto& tk : t) CHECK(tk == x0);
}

TEST_CASE("recurrence rejects mismatched input") {
  CHECK_THROWS_AS(chebyshev_terms(SparseOperator::identity(3), std::vector<double>{1, 2}, 2),
                  InputError);
  CHECK_THROWS_AS(chebyshev_terms(SparseOperator::identity(2), std::vector<double>{1, 2}, 0),
                  InputError);
}

TEST_CASE("recurrence matches dense matrix polynomials on an 8x8 operator") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(8, 8);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = i; j < 8; ++j) {
      if (i == j || u(rng) > 0.3) m(i, j) = m(j, i) = 0.4 * u(rng);
    }
  }
  auto op = SparseOperator::from_dense(m);
  std::vector<double> x0(8);
  for (auto& v : x0) v = u(rng);
  auto ours = chebyshev_terms(op, x0, 4);
  auto ref = oracle::dense_chebyshev(oracle::to_eigen(op),
                                     Eigen::Map<Eigen::VectorXd>(x0.data(), 8), 4);
  for (std::size_t k = 0; k <= 4; ++k) {
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(ours[k][i] - ref[k](i)) <= 1e-10);
  }
}

TEST_CASE("ExpIndex coefficients") {
  auto c0 = heat_coefficients(config(3, 1e-300, CoefficientScheme::ExpIndex));
  CHECK(c0 == std::vector<double>{1, 1, 1, 1});
  auto c1 = heat_coefficients(config(2, 1.0, CoefficientScheme::ExpIndex));
  CHECK(c1[0] == 1.0);
  CHECK(c1[1] == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK(c1[2] == doctest::Approx(0.1353352832366127).epsilon(1e-15));
}

TEST_CASE("ExpIndex coefficients decrease in k and in s") {
  for (double s : {0.1, 0.4, 0.8, 2.5}) {
    auto c = heat_coefficients(config(6, s, CoefficientScheme::ExpIndex));
    for (std::size_t k = 1; k < c.size(); ++k) CHECK(c[k] < c[k - 1]);
    auto c_more = heat_coefficients(config(6, s * 1.5, CoefficientScheme::ExpIndex));
    for (std::size_t k = 1; k < c.size(); ++k) CHECK(c_more[k] < c[k]);
  }
}

TEST_CASE("ChebyshevExact coefficients match the Bessel closed form") {
  // exp(-s(y+1)) = e^{-s} [I_0(s) + 2 sum_k (-1)^k I_k(s) T_k(y)]
  auto c = heat_coefficients(config(3, 1.0, CoefficientScheme::ChebyshevExact));
  CHECK(c[0] == doctest::Approx(0.46575960759364043).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(-0.41582083069941694).epsilon(1e-12));
  CHECK(c[2] == doctest::Approx(0.09987755378844711).epsilon(1e-12));
  CHECK(c[3] == doctest::Approx(-0.01631061554562859).epsilon(1e-12));
  for (double s : {0.1, 0.8, 2.5}) {
    auto cs = heat_coefficients(config(12, s, CoefficientScheme::ChebyshevExact));
    CHECK(std::abs(cs[0] - std::exp(-s) * std::cyl_bessel_i(0.0, s)) <= 1e-12);
    for (std::size_t k = 1; k < cs.size(); ++k) {
      const double sign = k % 2 ? -1.0 : 1.0;
      CHECK(std::abs(cs[k] - 2 * std::exp(-s) * sign * std::cyl_bessel_i(double(k), s)) <=
            1e-12);
    }
  }
}

TEST_CASE("ChebyshevExact reconstructs exp(-lambda) on [0, 2]") {
  auto c = heat_coefficients(config(20, 1.0, CoefficientScheme::ChebyshevExact));
  double worst = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double lam = 2.0 * i / 2000.0;
    worst = std::max(worst, std::abs(reconstruct(c, lam) - std::exp(-lam)));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("seed signal") {
  auto g = edges("1\t2\n2\t3\n2\t4\n", 5);  // degrees 0,1,3,1,1
  auto x = seed_signal(g, WaveletConfig{});
  CHECK(x[0] == 0.0);
  CHECK(x[1] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(x[2] == doctest::Approx(std::log(4.0)).epsilon(1e-15));

  auto iso = seed_signal(edges("", 4), WaveletConfig{});
  CHECK(iso == std::vector<double>(4, 0.0));

  auto star = seed_signal(edges("0\t1\n0\t2\n0\t3\n0\t4\n"), WaveletConfig{});
  CHECK(star[0] == doctest::Approx(std::log(5.0)));
  for (int i = 1; i < 5; ++i) CHECK(star[i] == doctest::Approx(std::log(2.0)));

  WaveletConfig custom;
  custom.seed_signal = SeedSignal::Custom;
  custom.custom_seed = {3.0, -1.0, 0.5, 2.0, 9.0};
  CHECK(seed_signal(g, custom) == custom.custom_seed);
  custom.custom_seed = {1.0};
  CHECK_THROWS_AS(seed_signal(g, custom), InputError);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(config(0, 1.0, CoefficientScheme::ExpIndex).validate(), InputError);
  CHECK_THROWS_AS(config(3, 0.0, CoefficientScheme::ExpIndex).validate(), InputError);
  auto bad = config(3, 1.0, CoefficientScheme::ExpIndex);
  bad.lambda_max = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  CHECK(parse_coefficient_scheme(to_string(CoefficientScheme::ChebyshevExact)) ==
        CoefficientScheme::ChebyshevExact);
}

TEST_CASE("isolated graph gives zero features") {
  auto f = wavelet_features(edges("", 5), config(3, 0.8, CoefficientScheme::ExpIndex));
  CHECK(f.values.rows() == 5);
  CHECK(f.values.cols() == 4);
  for (double v : f.values.data()) CHECK(v == 0.0);
  for (double v : f.raw_norms) CHECK(v == 0.0);
}

TEST_CASE("two-node features by hand") {
  auto f = wavelet_features(edges("0\t1\n"), config(1, 1.0, CoefficientScheme::ExpIndex));
  // S row = [ln2, -e^{-1} ln2]
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(f.values(i, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
    CHECK(f.values(i, 1) == doctest::Approx(-0.2689414213699951).epsilon(1e-14));
    CHECK(std::abs(f.values(i, 0)) + std::abs(f.values(i, 1)) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.raw_norms[i] ==
          doctest::Approx(std::log(2.0) * (1 + std::exp(-1.0))).epsilon(1e-14));
  }
}

TEST_CASE("dense oracle examples") {
  std::mt19937_64 rng(1);
  auto g = oracle::random_graph(12, 0.3, rng);
  auto id = dense_wavelet_oracle(g, 0.0);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) {
      CHECK(std::abs(id(i, j) - (i == j ? 1.0 : 0.0)) <= 1e-12);
    }
  }
  auto one = dense_wavelet_oracle(edges("", 1), 0.7);
  CHECK(one(0, 0) == doctest::Approx(std::exp(-0.7)).epsilon(1e-14));

  auto two = dense_wavelet_oracle(edges("0\t1\n"), 1.0);
  const double e2 = std::exp(-2.0);
  CHECK(two(0, 0) == doctest::Approx(0.5 * (1 + e2)).epsilon(1e-13));
  CHECK(two(0, 1) == doctest::Approx(0.5 * (1 - e2)).epsilon(1e-13));
  CHECK(two(1, 0) == doctest::Approx(0.5 * (1 - e2)).epsilon(1e-13));
  CHECK(two(1, 1) == doctest::Approx(0.5 * (1 + e2)).epsilon(1e-13));

  auto ref = oracle::heat_kernel(g, 1.3);
  auto ours = dense_wavelet_oracle(g, 1.3);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) CHECK(std::abs(ours(i, j) - ref(i, j)) <= 1e-12);
  }
}

TEST_CASE("dense oracle refuses large graphs") {
  CHECK_THROWS_AS(dense_wavelet_oracle(edges("", kDenseOracleLimit + 1), 1.0), InputError);
}

TEST_CASE("30-node features reproduce the heat kernel applied to x0") {
  std::mt19937_64 rng(30);
  auto g = oracle::random_graph(30, 0.12, rng);
  auto cfg = config(20, 1.0, CoefficientScheme::ChebyshevExact);
  auto f = wavelet_features(g, cfg);
  auto x0 = seed_signal(g, cfg);
  auto psi = oracle::heat_kernel(g, 1.0);
  Eigen::VectorXd want = psi * Eigen::Map<Eigen::VectorXd>(x0.data(), 30);
  // Row sums of S, recovered from H and the stored norms.
  Eigen::VectorXd got(30);
  for (std::size_t i = 0; i < 30; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= 20; ++k) s += f.values(i, k);
    got(i) = s * f.raw_norms[i];
  }
  CHECK((got - want).norm() <= 1e-3 * want.norm());
}

TEST_CASE("rows are l1-normalized and finite") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    auto g = oracle::random_graph(60, 0.04, rng);
    for (auto scheme : {CoefficientScheme::ExpIndex, CoefficientScheme::ChebyshevExact}) {
      auto f = wavelet_features(g, config(1 + rep % 5, 0.4 + 0.2 * rep, scheme));
      for (std::size_t i = 0; i < f.num_nodes; ++i) {
        double a = 0.0;
        for (double v : f.values.row(i)) {
          CHECK(std::isfinite(v));
          a += std::abs(v);
        }
        if (f.raw_norms[i] > 0) {
          CHECK(std::abs(a - 1.0) <= 1e-9);
        } else {
          CHECK(a == 0.0);
        }
      }
    }
  }
}

TEST_CASE("order-K features have K-hop support") {
  // Path 0-1-2-...-9 with the seed concentrated on node 0.
  std::string text;
  for (int i = 0; i < 9; ++i) text += std::to_string(i) + "\t" + std::to_string(i + 1) + "\n";
  auto g = edges(text);
  auto cfg = config(3, 0.5, CoefficientScheme::ChebyshevExact);
  cfg.seed_signal = SeedSignal::Custom;
  cfg.custom_seed.assign(10, 0.0);
  cfg.custom_seed[0] = 1.0;
  auto f = wavelet_features(g, cfg);
  for (std::size_t i = 0; i < 10; ++i) {
    if (i <= 3) {
      CHECK(f.raw_norms[i] > 0.0);
    } else {
      CHECK(f.raw_norms[i] == 0.0);
      for (double v : f.values.row(i)) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("filtered signal is the row sum of the unnormalized features") {
  std::mt19937_64 rng(6);
  auto g = oracle::random_graph(40, 0.1, rng);
  auto cfg = config(5, 0.8, CoefficientScheme::ExpIndex);
  auto l_hat = rescale_laplacian(sym_normalized_laplacian(g), cfg.lambda_max);
  auto terms = chebyshev_terms(l_hat, seed_signal(g, cfg), cfg.order_k);
  auto coeffs = heat_coefficients(cfg);
  auto sum = filtered_signal(terms, coeffs);
  auto f = assemble_features(terms, coeffs);
  for (std::size_t i = 0; i < 40; ++i) {
    double s = 0.0;
    for (double v : f.values.row(i)) s += v;
    CHECK(std::abs(s * f.raw_norms[i] - sum[i]) <= 1e-12 * (1 + std::abs(sum[i])));
  }
}
