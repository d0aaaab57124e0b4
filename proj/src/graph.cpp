#include "wats/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>
#include <string_view>

namespace wats {

std::size_t thread_count() {
  const char* env = std::getenv("WATS_THREADS");
  if (env == nullptr) return 1;
  const long v = std::strtol(env, nullptr, 10);
  return v <= 1 ? 1 : static_cast<std::size_t>(v);
}

Graph Graph::from_edges(std::size_t num_nodes, std::span<const Edge> edges) {
  std::vector<std::vector<std::size_t>> adj(num_nodes);
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw InputError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                       ") exceeds node count " + std::to_string(num_nodes));
    }
    if (u == v) continue;
    adj[u].push_back(v);
    adj[v].push_back(u);
  }

  Graph g;
  g.row_offsets_.assign(num_nodes + 1, 0);
  g.degrees_.assign(num_nodes, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    auto& nbrs = adj[i];
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    g.degrees_[i] = nbrs.size();
    g.row_offsets_[i + 1] = g.row_offsets_[i] + nbrs.size();
  }
  g.col_indices_.reserve(g.row_offsets_.back());
  for (auto& nbrs : adj) {
    g.col_indices_.insert(g.col_indices_.end(), nbrs.begin(), nbrs.end());
  }
  return g;
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  const auto nbrs = neighbors(i);
  return std::binary_search(nbrs.begin(), nbrs.end(), j);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::size_t parse_id(std::string_view tok, std::size_t line_no) {
  if (!tok.empty() && tok.front() == '-') {
    throw InputError("line " + std::to_string(line_no) + ": negative node id '" +
                     std::string(tok) + "'");
  }
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw InputError("line " + std::to_string(line_no) + ": malformed node id '" +
                     std::string(tok) + "'");
  }
  return value;
}

}  // namespace

Graph load_edge_list(std::istream& in, std::optional<std::size_t> num_nodes) {
  std::vector<Edge> edges;
  std::size_t max_id = 0;
  bool any = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;

    const auto sep = body.find_first_of(" \t");
    if (sep == std::string_view::npos) {
      throw InputError("line " + std::to_string(line_no) + ": expected two node ids");
    }
    const auto rest = trim(body.substr(sep));
    if (rest.find_first_of(" \t") != std::string_view::npos) {
      throw InputError("line " + std::to_string(line_no) + ": expected two node ids");
    }
    const std::size_t u = parse_id(body.substr(0, sep), line_no);
    const std::size_t v = parse_id(rest, line_no);
    if (num_nodes && (u >= *num_nodes || v >= *num_nodes)) {
      throw InputError("line " + std::to_string(line_no) + ": node id exceeds node count " +
                       std::to_string(*num_nodes));
    }
    max_id = std::max({max_id, u, v});
    any = true;
    edges.emplace_back(u, v);
  }
  const std::size_t n = num_nodes ? *num_nodes : (any ? max_id + 1 : 0);
  return Graph::from_edges(n, edges);
}

SparseOperator::SparseOperator(std::size_t dim, std::vector<std::size_t> row_offsets,
                               std::vector<std::size_t> col_indices, std::vector<double> values,
                               OperatorKind kind)
    : dim_(dim),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)),
      kind_(kind) {
  if (row_offsets_.size() != dim_ + 1 || col_indices_.size() != values_.size() ||
      row_offsets_.back() != values_.size()) {
    throw InputError("inconsistent CSR buffers");
  }
}

SparseOperator SparseOperator::identity(std::size_t dim) {
  std::vector<std::size_t> offsets(dim + 1);
  std::vector<std::size_t> cols(dim);
  for (std::size_t i = 0; i <= dim; ++i) offsets[i] = i;
  for (std::size_t i = 0; i < dim; ++i) cols[i] = i;
  return {dim, std::move(offsets), std::move(cols), std::vector<double>(dim, 1.0)};
}

SparseOperator SparseOperator::from_dense(const Matrix& m, double drop_below) {
  if (m.rows() != m.cols()) throw InputError("operator must be square");
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) > drop_below) {
        cols.push_back(j);
        vals.push_back(m(i, j));
      }
    }
    offsets.push_back(cols.size());
  }
  return {m.rows(), std::move(offsets), std::move(cols), std::move(vals)};
}

void SparseOperator::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != dim_ || y.size() != dim_) {
    throw InputError("mat-vec dimension mismatch: operator " + std::to_string(dim_) +
                     ", vector " + std::to_string(x.size()));
  }
  parallel_rows(dim_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double acc = 0.0;
      for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
        acc += values_[p] * x[col_indices_[p]];
      }
      y[i] = acc;
    }
  });
}

std::vector<double> SparseOperator::apply(std::span<const double> x) const {
  std::vector<double> y(dim_);
  apply(x, y);
  return y;
}

double SparseOperator::at(std::size_t i, std::size_t j) const {
  const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
  const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

Matrix SparseOperator::to_dense() const {
  Matrix m(dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
      m(i, col_indices_[p]) += values_[p];
    }
  }
  return m;
}

SparseOperator sym_normalized_laplacian(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.degrees()[i] > 0) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degrees()[i]));
  }

  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(g.col_indices().size() + n);
  vals.reserve(g.col_indices().size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool diag_done = false;
    for (std::size_t j : g.neighbors(i)) {
      if (!diag_done && j > i) {
        cols.push_back(i);
        vals.push_back(1.0);
        diag_done = true;
      }
      cols.push_back(j);
      vals.push_back(-inv_sqrt[i] * inv_sqrt[j]);
    }
    if (!diag_done) {
      cols.push_back(i);
      vals.push_back(1.0);
    }
    offsets[i + 1] = cols.size();
  }
  return {n, std::move(offsets), std::move(cols), std::move(vals),
          OperatorKind::SymNormalizedLaplacian};
}

SparseOperator rescale_laplacian(const SparseOperator& l, double lambda_max) {
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) {
    throw InputError("lambda_max must be positive, got " + std::to_string(lambda_max));
  }
  const double scale = 2.0 / lambda_max;
  const std::size_t n = l.dim();
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(l.values().size() + n);
  vals.reserve(l.values().size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool diag_done = false;
    for (std::size_t p = l.row_offsets()[i]; p < l.row_offsets()[i + 1]; ++p) {
      const std::size_t j = l.col_indices()[p];
      if (!diag_done && j > i) {
        cols.push_back(i);
        vals.push_back(-1.0);
        diag_done = true;
      }
      double v = scale * l.values()[p];
      if (j == i) {
        v -= 1.0;
        diag_done = true;
      }
      cols.push_back(j);
      vals.push_back(v);
    }
    if (!diag_done) {
      cols.push_back(i);
      vals.push_back(-1.0);
    }
    offsets[i + 1] = cols.size();
  }
  return {n, std::move(offsets), std::move(cols), std::move(vals),
          OperatorKind::RescaledLaplacian};
}

namespace {

// Deterministic start vector with no systematic alignment to any eigenvector.
double start_entry(std::size_t i) {
  std::uint64_t z = static_cast<std::uint64_t>(i) + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

SpectralBound spectral_radius_upper_bound(const SparseOperator& l) {
  const std::size_t n = l.dim();
  double gershgorin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t p = l.row_offsets()[i]; p < l.row_offsets()[i + 1]; ++p) {
      row += std::abs(l.values()[p]);
    }
    gershgorin = std::max(gershgorin, row);
  }
  if (n == 0) return {0.0, true, 0};

  constexpr int kMaxIter = 1000;
  constexpr double kRelTol = 1e-6;
  constexpr double kSafety = 1.01;

  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start_entry(i);
  double nv = norm2(v);
  for (double& x : v) x /= nv;

  std::vector<double> w(n);
  double estimate = 0.0;
  for (int it = 1; it <= kMaxIter; ++it) {
    l.apply(v, w);
    const double nw = norm2(w);
    if (nw == 0.0) return {0.0, true, it};
    const double prev = estimate;
    estimate = nw;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    if (it > 1 && std::abs(estimate - prev) <= kRelTol * estimate) {
      return {std::min(kSafety * estimate, gershgorin), true, it};
    }
  }
  const double fallback = l.kind() == OperatorKind::SymNormalizedLaplacian ? 2.0 : gershgorin;
  return {fallback, false, kMaxIter};
}

}  // namespace wats
