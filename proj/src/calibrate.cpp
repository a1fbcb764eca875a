#include "caring/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "caring/error.hpp"
#include "caring/metrics.hpp"

using nlohmann::json;

namespace caring {

namespace {

void check_tau(double tau) {
  if (!(tau >= kMinTemperature) || !std::isfinite(tau)) {
    throw InvalidArgument(fmt::format("temperature must be finite and >= {}, got {}", kMinTemperature, tau));
  }
}

Vector scaled_row(std::span<const double> row, double t) {
  Vector out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] / t;
  return out;
}

Matrix softmax_rows_scaled(const Matrix& logits, std::span<const double> temps) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const Vector p = softmax(scaled_row(logits.row(i), temps[i]));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

void check_labels(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows()) {
    throw InvalidArgument(
        fmt::format("{} labels for {} logit rows", labels.size(), logits.rows()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= logits.cols()) throw InvalidArgument(fmt::format("label out of range at row {}", i + 1));
  }
}

void check_caring_inputs(const Matrix& logits, const Matrix& features, const CaringModel& model) {
  if (features.rows() != logits.rows()) {
    throw InvalidArgument(fmt::format("shape mismatch: logits {} vs features {}", logits.shape_string(),
                                      features.shape_string()));
  }
  if (features.cols() != model.input_dim()) {
    throw InvalidArgument(fmt::format("shape mismatch: features {} vs model input_dim {}",
                                      features.shape_string(), model.input_dim()));
  }
}

// Hidden pre-activations, output pre-activation and T for one sample.
struct CaringForward {
  Vector pre_hidden;
  double pre_out = 0.0;
  double temperature = 1.0;
};

CaringForward caring_forward(std::span<const double> z, const CaringModel& model) {
  CaringForward f;
  f.pre_hidden = mat_vec(model.w1, z);
  double s = model.b2;
  for (std::size_t k = 0; k < f.pre_hidden.size(); ++k) {
    f.pre_hidden[k] += model.b1[k];
    s += model.w2[k] * std::max(f.pre_hidden[k], 0.0);
  }
  f.pre_out = s;
  f.temperature = 1.0 + std::max(s, 0.0);
  return f;
}

// NLL of one row at temperature t and dNLL/dt.
std::pair<double, double> row_nll_and_dt(std::span<const double> y, std::size_t label, double t) {
  const Vector lp = log_softmax(scaled_row(y, t));
  double expected = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) expected += std::exp(lp[j]) * y[j];
  return {-lp[label], (y[label] - expected) / (t * t)};
}

void shuffle(std::vector<std::size_t>& v, Prng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

// Batches of one epoch, in order.
std::vector<std::span<const std::size_t>> epoch_batches(std::vector<std::size_t>& order, std::size_t batch,
                                                        Prng& rng) {
  std::vector<std::span<const std::size_t>> out;
  if (batch == 0 || batch >= order.size()) {
    out.emplace_back(order);
    return out;
  }
  shuffle(order, rng);
  for (std::size_t start = 0; start < order.size(); start += batch) {
    out.emplace_back(order.data() + start, std::min(batch, order.size() - start));
  }
  return out;
}

TrainingTrace::Epoch summarize_epoch(std::size_t epoch, const Calibrator& c, const SampleSet& set) {
  const Vector temps = sample_temperatures(c, set);
  const Matrix log_probs = calibrated_log_probs(c, set);

  TrainingTrace::Epoch e;
  e.epoch = epoch;
  e.train_nll = nll(log_probs, set.labels);
  if (!std::isfinite(e.train_nll)) {
    throw NumericError(fmt::format("non-finite training loss at epoch {}", epoch));
  }

  // A single global temperature reports exactly (tau, 0) instead of summation residue.
  const auto [lo, hi] = std::minmax_element(temps.begin(), temps.end());
  if (*lo == *hi) {
    e.mean_t = *lo;
    e.std_t = 0.0;
  } else {
    double sum = 0.0;
    for (double t : temps) sum += t;
    e.mean_t = sum / static_cast<double>(temps.size());
    double sq = 0.0;
    for (double t : temps) sq += (t - e.mean_t) * (t - e.mean_t);
    e.std_t = std::sqrt(sq / static_cast<double>(temps.size()));
  }

  Matrix probs = log_probs;
  for (double& x : probs.data()) x = std::exp(x);
  const Predictions pred = predict(probs);
  std::vector<bool> correct(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) correct[i] = pred.labels[i] == set.labels[i];
  e.val_ece = ece(reliability_bins(pred.confidences, correct, kDefaultBins), set.size());
  return e;
}

json matrix_json(const Matrix& m) { return json(m.data()); }

std::vector<double> read_doubles(const json& j, const char* key, std::size_t expected) {
  if (!j.contains(key) || !j[key].is_array()) throw DataError(fmt::format("model: \"{}\" must be an array", key));
  std::vector<double> out;
  out.reserve(j[key].size());
  for (const auto& v : j[key]) {
    if (!v.is_number()) throw DataError(fmt::format("model: \"{}\" must contain numbers", key));
    out.push_back(v.get<double>());
  }
  if (out.size() != expected) {
    throw DataError(fmt::format("model: \"{}\" has {} entries, expected {}", key, out.size(), expected));
  }
  return out;
}

std::size_t read_count(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) {
    throw DataError(fmt::format("model: \"{}\" must be a non-negative integer", key));
  }
  return j[key].get<std::size_t>();
}

double read_number(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw DataError(fmt::format("model: \"{}\" must be a number", key));
  return j[key].get<double>();
}

}  // namespace

CaringModel CaringModel::zeros(std::size_t hidden, std::size_t input_dim) {
  CaringModel m;
  m.w1 = Matrix(hidden, input_dim);
  m.b1 = Vector(hidden, 0.0);
  m.w2 = Vector(hidden, 0.0);
  m.b2 = 0.0;
  return m;
}

void CaringModel::validate() const {
  if (hidden() < 1 || input_dim() < 1) {
    throw InvalidArgument(fmt::format("caring model needs hidden >= 1 and input_dim >= 1, got w1 {}",
                                      w1.shape_string()));
  }
  if (b1.size() != hidden() || w2.size() != hidden()) {
    throw InvalidArgument(fmt::format("caring model shape mismatch: w1 {}, b1 {}, w2 {}", w1.shape_string(),
                                      b1.size(), w2.size()));
  }
  if (!all_finite(w1.data()) || !all_finite(b1) || !all_finite(w2) || !std::isfinite(b2)) {
    throw InvalidArgument("caring model has non-finite parameters");
  }
}

std::string calibrator_kind(const Calibrator& c) {
  switch (c.index()) {
    case 0: return "identity";
    case 1: return "temperature";
    default: return "caring";
  }
}

bool requires_features(const Calibrator& c) noexcept { return std::holds_alternative<CaringModel>(c); }

Matrix confidences_identity(const Matrix& logits) {
  const Vector ones(logits.rows(), 1.0);
  return softmax_rows_scaled(logits, ones);
}

Matrix confidences_temperature(const Matrix& logits, double tau) {
  check_tau(tau);
  const Vector temps(logits.rows(), tau);
  return softmax_rows_scaled(logits, temps);
}

double caring_temperature(std::span<const double> z, const CaringModel& model) {
  if (z.size() != model.input_dim()) {
    throw InvalidArgument(
        fmt::format("feature length {} does not match model input_dim {}", z.size(), model.input_dim()));
  }
  return caring_forward(z, model).temperature;
}

Matrix confidences_caring(const Matrix& logits, const Matrix& features, const CaringModel& model) {
  check_caring_inputs(logits, features, model);
  Vector temps(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) temps[i] = caring_temperature(features.row(i), model);
  return softmax_rows_scaled(logits, temps);
}

Vector sample_temperatures(const Calibrator& c, const SampleSet& set) {
  const std::size_t n = set.size();
  if (const auto* t = std::get_if<TemperatureCalibrator>(&c)) {
    check_tau(t->tau);
    return Vector(n, t->tau);
  }
  if (const auto* model = std::get_if<CaringModel>(&c)) {
    if (!set.features) throw DataError("features required");
    check_caring_inputs(set.logits, *set.features, *model);
    Vector temps(n);
    for (std::size_t i = 0; i < n; ++i) temps[i] = caring_temperature(set.features->row(i), *model);
    return temps;
  }
  return Vector(n, 1.0);
}

Matrix calibrated_log_probs(const Calibrator& c, const SampleSet& set) {
  const Vector temps = sample_temperatures(c, set);
  Matrix out(set.logits.rows(), set.logits.cols());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Vector lp = log_softmax(scaled_row(set.logits.row(i), temps[i]));
    std::copy(lp.begin(), lp.end(), out.row(i).begin());
  }
  return out;
}

Matrix calibrated_probs(const Calibrator& c, const SampleSet& set) {
  const Vector temps = sample_temperatures(c, set);
  return softmax_rows_scaled(set.logits, temps);
}

TauGradient nll_grad_tau(const Matrix& logits, std::span<const std::size_t> labels, double tau,
                         std::span<const std::size_t> rows) {
  check_tau(tau);
  check_labels(logits, labels);
  std::vector<std::size_t> every;
  if (rows.empty()) {
    every = all_rows(logits.rows());
    rows = every;
  }
  TauGradient g;
  for (std::size_t i : rows) {
    const auto [loss, dt] = row_nll_and_dt(logits.row(i), labels[i], tau);
    g.nll += loss;
    g.d_tau += dt;
  }
  const auto n = static_cast<double>(rows.size());
  g.nll /= n;
  g.d_tau /= n;
  return g;
}

CaringGradient caring_nll_grad(const Matrix& logits, const Matrix& features,
                               std::span<const std::size_t> labels, const CaringModel& model,
                               std::span<const std::size_t> rows) {
  model.validate();
  check_caring_inputs(logits, features, model);
  check_labels(logits, labels);
  std::vector<std::size_t> every;
  if (rows.empty()) {
    every = all_rows(logits.rows());
    rows = every;
  }

  const std::size_t h = model.hidden();
  const std::size_t d = model.input_dim();
  CaringGradient g;
  g.w1 = Matrix(h, d);
  g.b1 = Vector(h, 0.0);
  g.w2 = Vector(h, 0.0);

  for (std::size_t i : rows) {
    const auto z = features.row(i);
    const CaringForward f = caring_forward(z, model);
    const auto [loss, d_t] = row_nll_and_dt(logits.row(i), labels[i], f.temperature);
    g.nll += loss;
    if (f.pre_out <= 0.0) continue;  // T clamped at 1: no gradient reaches the network

    // dT/ds = 1 on the active side of the outer relu.
    const double d_s = d_t;
    g.b2 += d_s;
    for (std::size_t k = 0; k < h; ++k) {
      if (f.pre_hidden[k] <= 0.0) continue;
      g.w2[k] += d_s * f.pre_hidden[k];
      const double d_h = d_s * model.w2[k];
      g.b1[k] += d_h;
      auto grad_row = g.w1.row(k);
      for (std::size_t j = 0; j < d; ++j) grad_row[j] += d_h * z[j];
    }
  }

  const auto n = static_cast<double>(rows.size());
  g.nll /= n;
  for (double& x : g.w1.data()) x /= n;
  for (double& x : g.b1) x /= n;
  for (double& x : g.w2) x /= n;
  g.b2 /= n;
  return g;
}

FitConfig FitConfig::temperature_defaults() {
  FitConfig cfg;
  cfg.lr = 0.01;
  cfg.epochs = 50;
  cfg.weight_decay = 0.0;
  return cfg;
}

FitConfig FitConfig::caring_defaults() {
  FitConfig cfg;
  cfg.lr = 5e-3;
  cfg.epochs = 300;
  cfg.weight_decay = 1e-6;
  cfg.hidden = 64;
  return cfg;
}

void FitConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument(fmt::format("lr must be > 0, got {}", lr));
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw InvalidArgument(fmt::format("weight decay must be >= 0, got {}", weight_decay));
  }
}

std::string trace_to_csv(const TrainingTrace& trace) {
  std::string out = "epoch,train_nll,mean_T,std_T\n";
  for (const auto& e : trace.epochs) {
    out += fmt::format("{},{},{},{}\n", e.epoch, format_double(e.train_nll), format_double(e.mean_t),
                       format_double(e.std_t));
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const TrainingTrace& trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("{}: cannot open for writing", path.string()));
  out << trace_to_csv(trace);
}

TemperatureFit fit_temperature(const SampleSet& val, const FitConfig& cfg) {
  cfg.validate();
  val.validate();

  Prng rng(cfg.seed);
  std::vector<std::size_t> order = all_rows(val.size());
  TemperatureFit fit;
  double tau = 1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (auto batch : epoch_batches(order, cfg.batch_size, rng)) {
      const TauGradient g = nll_grad_tau(val.logits, val.labels, tau, batch);
      if (!std::isfinite(g.d_tau)) throw NumericError(fmt::format("non-finite gradient at epoch {}", epoch));
      tau = std::max(tau - cfg.lr * g.d_tau, kMinTemperature);
    }
    fit.trace.epochs.push_back(summarize_epoch(epoch, TemperatureCalibrator{tau}, val));
  }
  fit.model.tau = tau;
  return fit;
}

CaringFit fit_caring(const SampleSet& val, const FitConfig& cfg) {
  cfg.validate();
  val.validate();
  if (!val.features) throw DataError("features required");
  if (cfg.hidden < 1) throw InvalidArgument("hidden must be >= 1");

  const std::size_t h = cfg.hidden;
  const std::size_t d = val.feature_dim();
  Prng rng(cfg.seed);
  CaringModel model = CaringModel::zeros(h, d);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& w : model.w1.data()) w = rng.uniform(-bound1, bound1);
  // w2 starts non-negative: with a symmetric draw the output pre-activation
  // can be <= 0 for every sample, and the outer relu then passes no gradient.
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (double& w : model.w2) w = rng.uniform(0.0, bound2);

  std::vector<std::size_t> order = all_rows(val.size());
  CaringFit fit;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (auto batch : epoch_batches(order, cfg.batch_size, rng)) {
      const CaringGradient g = caring_nll_grad(val.logits, *val.features, val.labels, model, batch);
      auto& w1 = model.w1.data();
      const auto& gw1 = g.w1.data();
      for (std::size_t k = 0; k < w1.size(); ++k) w1[k] -= cfg.lr * (gw1[k] + cfg.weight_decay * w1[k]);
      for (std::size_t k = 0; k < h; ++k) {
        model.b1[k] -= cfg.lr * g.b1[k];
        model.w2[k] -= cfg.lr * (g.w2[k] + cfg.weight_decay * model.w2[k]);
      }
      model.b2 -= cfg.lr * g.b2;
    }
    if (!all_finite(model.w1.data()) || !all_finite(model.b1) || !all_finite(model.w2) ||
        !std::isfinite(model.b2)) {
      throw NumericError(fmt::format("non-finite parameters at epoch {}", epoch));
    }
    fit.trace.epochs.push_back(summarize_epoch(epoch, model, val));
  }
  fit.model = std::move(model);
  return fit;
}

std::string model_to_json(const Calibrator& c) {
  json j;
  j["kind"] = calibrator_kind(c);
  if (const auto* t = std::get_if<TemperatureCalibrator>(&c)) {
    j["tau"] = t->tau;
  } else if (const auto* m = std::get_if<CaringModel>(&c)) {
    m->validate();
    j["hidden"] = m->hidden();
    j["input_dim"] = m->input_dim();
    j["w1"] = matrix_json(m->w1);
    j["b1"] = m->b1;
    j["w2"] = m->w2;
    j["b2"] = m->b2;
  }
  return j.dump(2) + "\n";
}

Calibrator model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("model: invalid JSON: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw DataError("model: missing \"kind\"");
  }
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "identity") return IdentityCalibrator{};
  if (kind == "temperature") {
    const double tau = read_number(j, "tau");
    if (!(tau >= kMinTemperature) || !std::isfinite(tau)) {
      throw DataError(fmt::format("model: tau must be >= {}, got {}", kMinTemperature, tau));
    }
    return TemperatureCalibrator{tau};
  }
  if (kind == "caring") {
    const std::size_t h = read_count(j, "hidden");
    const std::size_t d = read_count(j, "input_dim");
    if (h < 1 || d < 1) throw DataError("model: hidden and input_dim must be >= 1");
    CaringModel m;
    m.w1 = Matrix(h, d, read_doubles(j, "w1", h * d));
    m.b1 = read_doubles(j, "b1", h);
    m.w2 = read_doubles(j, "w2", h);
    m.b2 = read_number(j, "b2");
    try {
      m.validate();
    } catch (const InvalidArgument& e) {
      throw DataError(fmt::format("model: {}", e.what()));
    }
    return m;
  }
  throw DataError(fmt::format("model: unknown kind \"{}\"", kind));
}

void save_model(const Calibrator& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("{}: cannot open for writing", path.string()));
  out << model_to_json(c);
}

Calibrator load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError(fmt::format("{}: missing file", path.string()));
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace caring
