#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caring/calibrate.hpp"
#include "caring/dataset.hpp"
#include "caring/numerics.hpp"

namespace caring {

inline constexpr std::size_t kDefaultBins = 10;

// One confidence segment [lo, hi); the last segment also holds 1.0.
// Empty bins carry avg_conf = acc = 0.
struct BinStats {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double avg_conf = 0.0;
  double acc = 0.0;

  friend bool operator==(const BinStats&, const BinStats&) = default;
};

// Statistics over the samples whose ground truth is `index`. With support 0
// the metric fields are 0 and serialize as null.
struct PerClassRow {
  std::size_t index = 0;
  std::optional<std::string> name;
  std::size_t support = 0;
  double acc = 0.0;
  double avg_conf = 0.0;
  double delta_acc = 0.0;  // avg_conf - acc
  double ece = 0.0;

  friend bool operator==(const PerClassRow&, const PerClassRow&) = default;
};

struct CalibrationReport {
  double ece = 0.0;
  double brier = 0.0;
  double nll = 0.0;
  double accuracy = 0.0;
  double mean_confidence = 0.0;
  std::size_t n_total = 0;
  std::vector<BinStats> bins;
  std::vector<PerClassRow> per_class;
  std::vector<double> confidences;  // top-class confidence per sample

  friend bool operator==(const CalibrationReport&, const CalibrationReport&) = default;
};

struct Predictions {
  std::vector<std::size_t> labels;
  std::vector<double> confidences;
};

// Per-row argmax (lowest index on ties) and its probability. Rows must sum to 1
// within 1e-9 with entries in [0, 1]; otherwise InvalidArgument names the row.
Predictions predict(const Matrix& probs);

// Index of the segment holding `conf` under [i/K, (i+1)/K) edges, last one closed.
std::size_t bin_index(double conf, std::size_t bins);

std::vector<BinStats> reliability_bins(std::span<const double> confidences,
                                       std::span<const bool> correct, std::size_t bins);
std::vector<BinStats> reliability_bins(std::span<const double> confidences,
                                       const std::vector<bool>& correct, std::size_t bins);

// sum_i (count_i / n_total) * |acc_i - avg_conf_i|; throws InvalidArgument when
// n_total is 0 or disagrees with the bin counts.
double ece(std::span<const BinStats> bins, std::size_t n_total);

// Normalized Brier score: (1 / 2N) sum_i sum_a (onehot_ia - p_ia)^2, in [0, 1].
double brier(const Matrix& probs, std::span<const std::size_t> labels);

// Mean of -log_probs[i][label_i].
double nll(const Matrix& log_probs, std::span<const std::size_t> labels);
double nll(const Calibrator& c, const SampleSet& set);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

CalibrationReport full_report(const SampleSet& set, const Calibrator& c, std::size_t bins = kDefaultBins);

std::string report_to_json(const CalibrationReport& report);
CalibrationReport report_from_json(const std::string& text);

}  // namespace caring
