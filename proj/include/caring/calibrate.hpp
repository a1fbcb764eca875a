#pragma once

// Confidence estimators and their NLL fitting procedures.
//
//   Identity     p = softmax(y)
//   Temperature  p = softmax(y / tau)
//   Caring       p = softmax(y / T(z)),  T(z) = 1 + relu(w2 . relu(W1 z + b1) + b2)
//
// y are the frozen classifier logits and z its intermediate feature vector.
// Every estimator divides a logit row by a positive scalar, so the ranking of
// classes within a row (and therefore accuracy) never changes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "caring/dataset.hpp"
#include "caring/numerics.hpp"

namespace caring {

inline constexpr double kMinTemperature = 1e-3;

struct IdentityCalibrator {
  friend bool operator==(const IdentityCalibrator&, const IdentityCalibrator&) = default;
};

struct TemperatureCalibrator {
  double tau = 1.0;
  friend bool operator==(const TemperatureCalibrator&, const TemperatureCalibrator&) = default;
};

// Two-layer temperature regressor. w1 is hidden x input_dim, w2 has one entry per hidden unit.
struct CaringModel {
  Matrix w1;
  Vector b1;
  Vector w2;
  double b2 = 0.0;

  std::size_t hidden() const noexcept { return w1.rows(); }
  std::size_t input_dim() const noexcept { return w1.cols(); }

  static CaringModel zeros(std::size_t hidden, std::size_t input_dim);

  // Throws InvalidArgument on inconsistent shapes or non-finite parameters.
  void validate() const;

  friend bool operator==(const CaringModel&, const CaringModel&) = default;
};

using Calibrator = std::variant<IdentityCalibrator, TemperatureCalibrator, CaringModel>;

// "identity", "temperature" or "caring".
std::string calibrator_kind(const Calibrator& c);
bool requires_features(const Calibrator& c) noexcept;

Matrix confidences_identity(const Matrix& logits);
Matrix confidences_temperature(const Matrix& logits, double tau);
double caring_temperature(std::span<const double> z, const CaringModel& model);
Matrix confidences_caring(const Matrix& logits, const Matrix& features, const CaringModel& model);

// Per-sample temperature applied by `c` (1 for identity, tau for temperature).
// Throws DataError("features required") when a Caring model meets a feature-less set.
Vector sample_temperatures(const Calibrator& c, const SampleSet& set);

// Row-wise log_softmax(y_i / T_i); the stable route for NLL.
Matrix calibrated_log_probs(const Calibrator& c, const SampleSet& set);
Matrix calibrated_probs(const Calibrator& c, const SampleSet& set);

struct TauGradient {
  double nll = 0.0;
  double d_tau = 0.0;
};

// Mean NLL of softmax(y / tau) and its derivative in tau. With q = y / tau and
// p = softmax(q), -log p_a = -q_a + lse(q) and dq_j/dtau = -y_j / tau^2, so
//   dNLL_i/dtau = (y_ia - sum_j p_ij y_ij) / tau^2.
// `rows` selects a subset of samples (all samples when empty).
TauGradient nll_grad_tau(const Matrix& logits, std::span<const std::size_t> labels, double tau,
                         std::span<const std::size_t> rows = {});

struct CaringGradient {
  double nll = 0.0;
  Matrix w1;
  Vector b1;
  Vector w2;
  double b2 = 0.0;
};

// Mean NLL of the Caring probabilities and its exact gradient with respect to
// every model parameter (weight decay not included). relu is treated as having
// zero slope at 0.
CaringGradient caring_nll_grad(const Matrix& logits, const Matrix& features,
                               std::span<const std::size_t> labels, const CaringModel& model,
                               std::span<const std::size_t> rows = {});

struct FitConfig {
  double lr = 0.01;
  std::size_t epochs = 50;
  double weight_decay = 0.0;
  std::size_t hidden = 64;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;  // 0 = full batch

  static FitConfig temperature_defaults();
  static FitConfig caring_defaults();

  void validate() const;
};

struct TrainingTrace {
  struct Epoch {
    std::size_t epoch = 0;
    double train_nll = 0.0;
    std::optional<double> val_ece;
    double mean_t = 0.0;
    double std_t = 0.0;
  };
  std::vector<Epoch> epochs;
};

// Columns: epoch,train_nll,mean_T,std_T
std::string trace_to_csv(const TrainingTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const TrainingTrace& trace);

struct TemperatureFit {
  TemperatureCalibrator model;
  TrainingTrace trace;
};

struct CaringFit {
  CaringModel model;
  TrainingTrace trace;
};

// Gradient descent on tau from tau = 1, projecting onto [kMinTemperature, inf)
// after every step. Each epoch is one pass over a seeded shuffle in batches of
// cfg.batch_size (a single full-batch step when batch_size is 0).
TemperatureFit fit_temperature(const SampleSet& val, const FitConfig& cfg);

// Init from cfg.seed: w1 ~ U(-1/sqrt(d), 1/sqrt(d)), w2 ~ U[0, 1/sqrt(h)),
// zero biases, so T(z) starts just above 1 with an active output unit. Then
// gradient descent on NLL with weight decay on w1 and w2 only. The logits are
// only ever read.
CaringFit fit_caring(const SampleSet& val, const FitConfig& cfg);

// Model file JSON: {"kind": "identity"} | {"kind": "temperature", "tau": x} |
// {"kind": "caring", "hidden", "input_dim", "w1" (row-major), "b1", "w2", "b2"}.
// Doubles are written in shortest round-trip form, so save/load is bit-exact.
std::string model_to_json(const Calibrator& c);
Calibrator model_from_json(const std::string& text);
void save_model(const Calibrator& c, const std::filesystem::path& path);
Calibrator load_model(const std::filesystem::path& path);

}  // namespace caring
