#include "wats/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wats/metrics.hpp"

namespace wats {

namespace {

// Uniform double in [0, 1) from the top 53 bits; independent of the standard
// library's distribution implementations.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_width(const CalibratorParams& params, const WaveletFeatures& h) {
  if (h.width() != params.input_dim) {
    throw InputError("feature width " + std::to_string(h.width()) +
                     " does not match calibrator input " + std::to_string(params.input_dim));
  }
}

}  // namespace

CalibratorParams CalibratorParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  CalibratorParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w1 = Matrix(hidden_dim, input_dim);
  p.b1.assign(hidden_dim, 0.0);
  p.w2.assign(hidden_dim, 0.0);
  return p;
}

CalibratorParams CalibratorParams::initialize(std::size_t input_dim, std::size_t hidden_dim,
                                              double dropout_rate, std::uint64_t seed) {
  auto p = zeros(input_dim, hidden_dim);
  p.dropout_rate = dropout_rate;
  p.rng_seed = seed;
  p.validate();
  std::mt19937_64 rng(seed);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto draw = [&rng](double bound) { return (2.0 * unit_uniform(rng) - 1.0) * bound; };
  for (double& v : p.w1.data()) v = draw(bound1);
  for (double& v : p.b1) v = draw(bound1);
  for (double& v : p.w2) v = draw(bound2);
  p.b2 = draw(bound2);
  return p;
}

void CalibratorParams::validate() const {
  if (hidden_dim < 1) throw InputError("hidden_dim must be >= 1");
  if (input_dim < 1) throw InputError("input_dim must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InputError("dropout rate must lie in [0, 1)");
  }
  if (w1.rows() != hidden_dim || w1.cols() != input_dim || b1.size() != hidden_dim ||
      w2.size() != hidden_dim) {
    throw InputError("calibrator weight shapes are inconsistent");
  }
  const auto flat = flatten();
  if (!std::all_of(flat.begin(), flat.end(), [](double v) { return std::isfinite(v); })) {
    throw InputError("calibrator weights must be finite");
  }
}

std::vector<double> CalibratorParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), w1.data().begin(), w1.data().end());
  flat.insert(flat.end(), b1.begin(), b1.end());
  flat.insert(flat.end(), w2.begin(), w2.end());
  flat.push_back(b2);
  return flat;
}

void CalibratorParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw InputError("flat parameter size mismatch");
  auto it = flat.begin();
  std::copy_n(it, w1.data().size(), w1.data().begin());
  it += static_cast<std::ptrdiff_t>(w1.data().size());
  std::copy_n(it, hidden_dim, b1.begin());
  it += static_cast<std::ptrdiff_t>(hidden_dim);
  std::copy_n(it, hidden_dim, w2.begin());
  it += static_cast<std::ptrdiff_t>(hidden_dim);
  b2 = *it;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
  if (max_epochs < 1) throw InputError("max_epochs must be >= 1");
  if (!(weight_decay >= 0.0)) throw InputError("weight decay must be non-negative");
}

void LogitSet::validate() const {
  if (logits.rows() != num_nodes || logits.cols() != num_classes) {
    throw InputError("logit matrix is " + std::to_string(logits.rows()) + "x" +
                     std::to_string(logits.cols()) + ", expected " + std::to_string(num_nodes) +
                     "x" + std::to_string(num_classes));
  }
  if (num_classes < 2) throw InputError("need at least two classes");
  if (labels.size() != num_nodes) {
    throw InputError("got " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(num_nodes) + " nodes");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw InputError("label of node " + std::to_string(i) + " out of range");
    }
  }
  std::vector<char> seen(num_nodes, 0);
  for (const auto* set : {&split.train, &split.val, &split.test}) {
    for (std::size_t i : *set) {
      if (i >= num_nodes) throw InputError("split index " + std::to_string(i) + " out of range");
      if (seen[i]) throw InputError("split sets overlap at node " + std::to_string(i));
      seen[i] = 1;
    }
  }
}

Matrix sample_dropout_mask(std::size_t rows, std::size_t hidden, double rate,
                           std::mt19937_64& rng) {
  Matrix mask(rows, hidden, 1.0);
  if (rate <= 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : mask.data()) v = unit_uniform(rng) < rate ? 0.0 : keep_scale;
  return mask;
}

namespace {

// Forward pass for one feature row; fills the pre-activation buffer.
double forward_logit(const CalibratorParams& p, std::span<const double> h,
                     std::span<const double> mask_row, std::vector<double>& pre) {
  double o = p.b2;
  for (std::size_t j = 0; j < p.hidden_dim; ++j) {
    const auto wrow = p.w1.row(j);
    double s = p.b1[j];
    for (std::size_t d = 0; d < p.input_dim; ++d) s += wrow[d] * h[d];
    pre[j] = s;
    double a = s > 0.0 ? s : 0.0;
    if (!mask_row.empty()) a *= mask_row[j];
    o += p.w2[j] * a;
  }
  return o;
}

}  // namespace

std::vector<double> temperatures(const CalibratorParams& params, const WaveletFeatures& h,
                                 bool training_mode, std::mt19937_64* rng) {
  check_width(params, h);
  const std::size_t n = h.num_nodes;
  Matrix mask;
  if (training_mode && params.dropout_rate > 0.0) {
    if (rng == nullptr) throw InputError("training-mode temperatures need an RNG");
    mask = sample_dropout_mask(n, params.hidden_dim, params.dropout_rate, *rng);
  }
  std::vector<double> tau(n);
  std::vector<double> pre(params.hidden_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto mrow = mask.rows() ? mask.row(i) : std::span<const double>{};
    tau[i] = softplus(forward_logit(params, h.values.row(i), mrow, pre));
  }
  return tau;
}

Matrix scale_logits(const Matrix& logits, std::span<const double> tau) {
  if (tau.size() != logits.rows()) throw InputError("one temperature per row required");
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!(tau[i] > 0.0)) {
      throw InputError("temperature of node " + std::to_string(i) + " is not positive");
    }
    const auto z = logits.row(i);
    auto o = out.row(i);
    for (std::size_t c = 0; c < z.size(); ++c) o[c] = z[c] / tau[i];
  }
  return out;
}

LossGradient wats_loss_gradient(const CalibratorParams& params, const WaveletFeatures& h,
                                const Matrix& logits, std::span<const std::size_t> labels,
                                std::span<const std::size_t> subset, double weight_decay,
                                const Matrix* dropout_mask) {
  check_width(params, h);
  if (subset.empty()) throw InputError("loss over an empty subset");
  if (dropout_mask != nullptr &&
      (dropout_mask->rows() != subset.size() || dropout_mask->cols() != params.hidden_dim)) {
    throw InputError("dropout mask shape mismatch");
  }

  const std::size_t hidden = params.hidden_dim;
  const std::size_t in = params.input_dim;
  const double inv_n = 1.0 / static_cast<double>(subset.size());

  LossGradient out;
  out.gradient.assign(params.parameter_count(), 0.0);
  double* g_w1 = out.gradient.data();
  double* g_b1 = g_w1 + hidden * in;
  double* g_w2 = g_b1 + hidden;
  double& g_b2 = g_w2[hidden];

  std::vector<double> pre(hidden);
  std::vector<double> probs(logits.cols());
  double total = 0.0;
  for (std::size_t t = 0; t < subset.size(); ++t) {
    const std::size_t i = subset[t];
    const auto feat = h.values.row(i);
    const auto mrow = dropout_mask ? dropout_mask->row(t) : std::span<const double>{};
    const double o = forward_logit(params, feat, mrow, pre);
    const double tau = softplus(o);

    const auto z = logits.row(i);
    const std::size_t y = labels[i];
    double umax = -std::numeric_limits<double>::infinity();
    for (double v : z) umax = std::max(umax, v / tau);
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      probs[c] = std::exp(z[c] / tau - umax);
      sum += probs[c];
    }
    total += umax + std::log(sum) - z[y] / tau;

    // d CE / d tau = (z_y - sum_c p_c z_c) / tau^2
    double expected_z = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) expected_z += probs[c] / sum * z[c];
    const double d_tau = (z[y] - expected_z) / (tau * tau);
    const double d_o = d_tau * sigmoid(o) * inv_n;

    g_b2 += d_o;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double m = mrow.empty() ? 1.0 : mrow[j];
      const double act = pre[j] > 0.0 ? pre[j] * m : 0.0;
      g_w2[j] += d_o * act;
      if (pre[j] <= 0.0) continue;
      const double d_pre = d_o * params.w2[j] * m;
      g_b1[j] += d_pre;
      double* grow = g_w1 + j * in;
      for (std::size_t d = 0; d < in; ++d) grow[d] += d_pre * feat[d];
    }
  }
  out.loss = total * inv_n;

  if (weight_decay > 0.0) {
    const auto flat = params.flatten();
    double sq = 0.0;
    for (std::size_t q = 0; q < flat.size(); ++q) {
      sq += flat[q] * flat[q];
      out.gradient[q] += 2.0 * weight_decay * flat[q];
    }
    out.loss += weight_decay * sq;
  }
  return out;
}

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double selection_score(const CalibratorParams& params, const WaveletFeatures& h,
                       const LogitSet& data, SelectionMetric metric) {
  const auto& val = data.split.val;
  std::vector<double> pre(params.hidden_dim);
  if (metric == SelectionMetric::Nll) {
    double total = 0.0;
    for (std::size_t i : val) {
      const double tau = softplus(forward_logit(params, h.values.row(i), {}, pre));
      total += scaled_nll(data.logits, data.labels, std::span<const std::size_t>(&i, 1), tau);
    }
    return total / static_cast<double>(val.size());
  }
  std::vector<double> conf(val.size());
  std::vector<bool> correct(val.size());
  for (std::size_t t = 0; t < val.size(); ++t) {
    const std::size_t i = val[t];
    const double tau = softplus(forward_logit(params, h.values.row(i), {}, pre));
    const auto z = data.logits.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c) {
      if (z[c] > z[best]) best = c;
    }
    double sum = 0.0;
    for (double v : z) sum += std::exp((v - z[best]) / tau);
    conf[t] = 1.0 / sum;
    correct[t] = best == data.labels[i];
  }
  return ece(conf, correct, 10).ece;
}

}  // namespace

TrainResult train_wats(const WaveletFeatures& h, const LogitSet& data,
                       const CalibratorParams& params0, const TrainConfig& cfg) {
  cfg.validate();
  params0.validate();
  data.validate();
  check_width(params0, h);
  if (data.split.val.empty()) throw InputError("validation split required");
  if (h.num_nodes != data.num_nodes) {
    throw InputError("feature rows (" + std::to_string(h.num_nodes) + ") and logit rows (" +
                     std::to_string(data.num_nodes) + ") differ");
  }

  CalibratorParams current = params0;
  std::vector<double> theta = current.flatten();
  std::vector<double> m1(theta.size(), 0.0);
  std::vector<double> m2(theta.size(), 0.0);
  std::mt19937_64 rng(params0.rng_seed ^ 0xD1B54A32D192ED03ULL);

  TrainResult result;
  result.params = current;
  result.best_score = selection_score(current, h, data, cfg.selection);
  if (!std::isfinite(result.best_score)) {
    throw NumericError("non-finite validation score at epoch 0 (parameter norm " +
                       std::to_string(l2_norm(theta)) + ")");
  }
  result.best_history.push_back(result.best_score);

  std::size_t since_best = 0;
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Matrix mask;
    if (current.dropout_rate > 0.0) {
      mask = sample_dropout_mask(data.split.val.size(), current.hidden_dim,
                                 current.dropout_rate, rng);
    }
    const auto lg = wats_loss_gradient(current, h, data.logits, data.labels, data.split.val,
                                       cfg.weight_decay, mask.rows() ? &mask : nullptr);
    if (!std::isfinite(lg.loss)) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                         " (parameter norm " + std::to_string(l2_norm(theta)) + ")");
    }

    if (cfg.optimizer == Optimizer::Adam) {
      beta1_pow *= cfg.adam_beta1;
      beta2_pow *= cfg.adam_beta2;
      for (std::size_t q = 0; q < theta.size(); ++q) {
        const double g = lg.gradient[q];
        m1[q] = cfg.adam_beta1 * m1[q] + (1.0 - cfg.adam_beta1) * g;
        m2[q] = cfg.adam_beta2 * m2[q] + (1.0 - cfg.adam_beta2) * g * g;
        const double mhat = m1[q] / (1.0 - beta1_pow);
        const double vhat = m2[q] / (1.0 - beta2_pow);
        theta[q] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
      }
    } else {
      for (std::size_t q = 0; q < theta.size(); ++q) {
        theta[q] -= cfg.learning_rate * lg.gradient[q];
      }
    }
    current.assign(theta);
    result.epochs_run = epoch;

    const double score = selection_score(current, h, data, cfg.selection);
    if (!std::isfinite(score)) {
      throw NumericError("non-finite validation score at epoch " + std::to_string(epoch) +
                         " (parameter norm " + std::to_string(l2_norm(theta)) + ")");
    }
    if (score < result.best_score) {
      result.best_score = score;
      result.best_epoch = epoch;
      result.params = current;
      result.best_history.push_back(score);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

double scaled_nll(const Matrix& logits, std::span<const std::size_t> labels,
                  std::span<const std::size_t> subset, double tau) {
  if (subset.empty()) throw InputError("NLL over an empty subset");
  double total = 0.0;
  for (std::size_t i : subset) {
    const auto z = logits.row(i);
    const double zmax = *std::max_element(z.begin(), z.end()) / tau;
    double sum = 0.0;
    for (double v : z) sum += std::exp(v / tau - zmax);
    total += zmax + std::log(sum) - z[labels[i]] / tau;
  }
  return total / static_cast<double>(subset.size());
}

GlobalTemperature fit_global_ts(const LogitSet& data, TemperatureInterval interval) {
  if (data.split.val.empty()) throw InputError("validation split required");
  if (!(interval.lo > 0.0) || interval.hi < interval.lo) {
    throw InputError("temperature interval must satisfy 0 < lo <= hi");
  }
  const auto& val = data.split.val;
  auto f = [&](double tau) { return scaled_nll(data.logits, data.labels, val, tau); };

  constexpr double kTol = 1e-4;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = interval.lo;
  double b = interval.hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > kTol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  GlobalTemperature best{0.5 * (a + b), f(0.5 * (a + b))};
  // Monotone objectives push the optimum onto an end of the interval.
  for (double edge : {interval.lo, interval.hi}) {
    const double fe = f(edge);
    if (fe < best.nll) best = {edge, fe};
  }
  return best;
}

Matrix EtsModel::probabilities(const Matrix& logits) const {
  const std::vector<double> tau(logits.rows(), temperature);
  const Matrix scaled = softmax_rows(scale_logits(logits, tau));
  const Matrix raw = softmax_rows(logits);
  const double uniform = 1.0 / static_cast<double>(logits.cols());
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t q = 0; q < out.data().size(); ++q) {
    out.data()[q] = weights[0] * scaled.data()[q] + weights[1] * raw.data()[q] +
                    weights[2] * uniform;
  }
  return out;
}

std::array<double, 3> project_to_simplex(std::array<double, 3> v) {
  std::array<double, 3> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  for (double& x : v) x = std::max(x - theta, 0.0);
  return v;
}

EtsModel fit_ets(const LogitSet& data, TemperatureInterval interval) {
  if (data.split.val.empty()) throw InputError("validation split required");
  const auto ts = fit_global_ts(data, interval);
  const auto& val = data.split.val;

  // Per validation node: probability of the true label under each component.
  const std::vector<double> tau(data.num_nodes, ts.temperature);
  const Matrix scaled = softmax_rows(scale_logits(data.logits, tau));
  const Matrix raw = softmax_rows(data.logits);
  const double uniform = 1.0 / static_cast<double>(data.num_classes);
  std::vector<std::array<double, 3>> comp(val.size());
  for (std::size_t t = 0; t < val.size(); ++t) {
    const std::size_t i = val[t];
    comp[t] = {scaled(i, data.labels[i]), raw(i, data.labels[i]), uniform};
  }

  constexpr double kFloor = std::numeric_limits<double>::min();
  auto objective = [&](const std::array<double, 3>& w, std::array<double, 3>* grad) {
    double total = 0.0;
    if (grad) grad->fill(0.0);
    for (const auto& c : comp) {
      const double p = std::max(w[0] * c[0] + w[1] * c[1] + w[2] * c[2], kFloor);
      total -= std::log(p);
      if (grad) {
        for (std::size_t k = 0; k < 3; ++k) (*grad)[k] -= c[k] / p;
      }
    }
    const double inv_n = 1.0 / static_cast<double>(comp.size());
    if (grad) {
      for (double& g : *grad) g *= inv_n;
    }
    return total * inv_n;
  };

  constexpr std::size_t kSteps = 500;
  constexpr double kRate = 0.01;
  std::array<double, 3> w{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::array<double, 3> best_w = w;
  double best = objective(w, nullptr);
  std::array<double, 3> grad{};
  for (std::size_t step = 0; step < kSteps; ++step) {
    objective(w, &grad);
    for (std::size_t k = 0; k < 3; ++k) w[k] -= kRate * grad[k];
    w = project_to_simplex(w);
    const double value = objective(w, nullptr);
    if (value < best) {
      best = value;
      best_w = w;
    }
  }

  // A fixed step budget can stop short of the optimum. Two cheap feasible
  // candidates are tried: the iterate with one component dropped (a slowly
  // vanishing weight is the usual culprit) and the single-component vertices.
  constexpr double kVertexSlack = 1e-6;
  const std::array<double, 3> iterate = best_w;
  for (std::size_t k = 0; k < 3; ++k) {
    std::array<double, 3> face = iterate;
    face[k] = 0.0;
    const double rest = face[0] + face[1] + face[2];
    if (rest <= 0.0) continue;
    for (double& v : face) v /= rest;
    const double value = objective(face, nullptr);
    if (value < best - kVertexSlack) {
      best = value;
      best_w = face;
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    std::array<double, 3> vertex{};
    vertex[k] = 1.0;
    const double value = objective(vertex, nullptr);
    if (value < best - kVertexSlack) {
      best = value;
      best_w = vertex;
    }
  }

  EtsModel model;
  model.temperature = ts.temperature;
  model.weights = best_w;
  model.nll = best;
  return model;
}

}  // namespace wats
