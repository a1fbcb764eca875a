#include "caring/metrics.hpp"

#include <cmath>
#include <memory>

#include <fmt/format.h>
#include <json.hpp>

#include "caring/error.hpp"

using nlohmann::json;

namespace caring {

namespace {

constexpr double kRowSumTolerance = 1e-9;

void check_bins(std::size_t bins) {
  if (bins < 1) throw InvalidArgument("bin count must be >= 1");
}

double edge(std::size_t i, std::size_t bins) { return static_cast<double>(i) / static_cast<double>(bins); }

void check_prob_rows(const Matrix& probs) {
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (double p : probs.row(i)) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidArgument(fmt::format("row {}: probability {} outside [0, 1]", i + 1, p));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw InvalidArgument(fmt::format("row {}: probabilities sum to {}, not 1", i + 1, sum));
    }
  }
}

json nullable(double v, bool present) { return present ? json(v) : json(nullptr); }

double number_or_zero(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return 0.0;
  if (!j[key].is_number()) throw DataError(fmt::format("report: \"{}\" must be a number", key));
  return j[key].get<double>();
}

std::size_t count_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) {
    throw DataError(fmt::format("report: \"{}\" must be a non-negative integer", key));
  }
  return j[key].get<std::size_t>();
}

}  // namespace

Predictions predict(const Matrix& probs) {
  check_prob_rows(probs);
  Predictions out;
  out.labels.reserve(probs.rows());
  out.confidences.reserve(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const std::size_t k = argmax(probs.row(i));
    out.labels.push_back(k);
    out.confidences.push_back(probs(i, k));
  }
  return out;
}

std::size_t bin_index(double conf, std::size_t bins) {
  check_bins(bins);
  if (!(conf >= 0.0 && conf <= 1.0)) throw InvalidArgument(fmt::format("confidence {} outside [0, 1]", conf));
  auto idx = static_cast<std::size_t>(conf * static_cast<double>(bins));
  if (idx >= bins) idx = bins - 1;
  // conf * K can round across an edge; settle against the edges themselves.
  while (idx > 0 && conf < edge(idx, bins)) --idx;
  while (idx + 1 < bins && conf >= edge(idx + 1, bins)) ++idx;
  return idx;
}

std::vector<BinStats> reliability_bins(std::span<const double> confidences, std::span<const bool> correct,
                                       std::size_t bins) {
  check_bins(bins);
  if (confidences.size() != correct.size()) {
    throw InvalidArgument(
        fmt::format("{} confidences vs {} correctness flags", confidences.size(), correct.size()));
  }
  std::vector<BinStats> out(bins);
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<std::size_t> hits(bins, 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const std::size_t b = bin_index(confidences[i], bins);
    out[b].count += 1;
    conf_sum[b] += confidences[i];
    if (correct[i]) hits[b] += 1;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = edge(b, bins);
    out[b].hi = edge(b + 1, bins);
    if (out[b].count > 0) {
      const auto n = static_cast<double>(out[b].count);
      out[b].avg_conf = conf_sum[b] / n;
      out[b].acc = static_cast<double>(hits[b]) / n;
    }
  }
  return out;
}

std::vector<BinStats> reliability_bins(std::span<const double> confidences, const std::vector<bool>& correct,
                                       std::size_t bins) {
  const std::unique_ptr<bool[]> flags(new bool[correct.size()]);
  for (std::size_t i = 0; i < correct.size(); ++i) flags[i] = correct[i];
  return reliability_bins(confidences, std::span<const bool>(flags.get(), correct.size()), bins);
}

double ece(std::span<const BinStats> bins, std::size_t n_total) {
  if (n_total == 0) throw InvalidArgument("ece: n_total must be >= 1");
  std::size_t counted = 0;
  for (const auto& b : bins) counted += b.count;
  if (counted != n_total) {
    throw InvalidArgument(fmt::format("ece: bin counts sum to {}, n_total is {}", counted, n_total));
  }
  const auto total = static_cast<double>(n_total);
  double err = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    err += (static_cast<double>(b.count) / total) * std::abs(b.acc - b.avg_conf);
  }
  return err;
}

double brier(const Matrix& probs, std::span<const std::size_t> labels) {
  check_prob_rows(probs);
  if (labels.size() != probs.rows() || labels.empty()) {
    throw InvalidArgument(fmt::format("brier: {} labels for {} rows", labels.size(), probs.rows()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (labels[i] >= probs.cols()) throw InvalidArgument(fmt::format("label out of range at row {}", i + 1));
    const auto row = probs.row(i);
    for (std::size_t a = 0; a < row.size(); ++a) {
      const double diff = (a == labels[i] ? 1.0 : 0.0) - row[a];
      sum += diff * diff;
    }
  }
  return sum / (2.0 * static_cast<double>(probs.rows()));
}

double nll(const Matrix& log_probs, std::span<const std::size_t> labels) {
  if (labels.size() != log_probs.rows() || labels.empty()) {
    throw InvalidArgument(fmt::format("nll: {} labels for {} rows", labels.size(), log_probs.rows()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= log_probs.cols()) throw InvalidArgument(fmt::format("label out of range at row {}", i + 1));
    sum -= log_probs(i, labels[i]);
  }
  return sum / static_cast<double>(labels.size());
}

double nll(const Calibrator& c, const SampleSet& set) { return nll(calibrated_log_probs(c, set), set.labels); }

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size() || labels.empty()) {
    throw InvalidArgument(fmt::format("accuracy: {} predictions for {} labels", predicted.size(), labels.size()));
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

CalibrationReport full_report(const SampleSet& set, const Calibrator& c, std::size_t bins) {
  check_bins(bins);
  set.validate();
  if (requires_features(c) && !set.features) throw DataError("features required");

  const Matrix log_probs = calibrated_log_probs(c, set);
  Matrix probs = log_probs;
  for (double& x : probs.data()) x = std::exp(x);
  const Predictions pred = predict(probs);
  const std::size_t n = set.size();

  std::vector<bool> correct(n);
  for (std::size_t i = 0; i < n; ++i) correct[i] = pred.labels[i] == set.labels[i];

  CalibrationReport r;
  r.n_total = n;
  r.bins = reliability_bins(pred.confidences, correct, bins);
  r.ece = ece(r.bins, n);
  r.brier = brier(probs, set.labels);
  r.nll = nll(log_probs, set.labels);
  r.accuracy = accuracy(pred.labels, set.labels);
  double conf_sum = 0.0;
  for (double x : pred.confidences) conf_sum += x;
  r.mean_confidence = conf_sum / static_cast<double>(n);
  r.confidences = pred.confidences;

  const std::size_t m = set.num_classes();
  for (std::size_t k = 0; k < m; ++k) {
    PerClassRow row;
    row.index = k;
    if (set.class_names) row.name = (*set.class_names)[k];
    std::vector<double> confs;
    std::vector<bool> hits;
    for (std::size_t i = 0; i < n; ++i) {
      if (set.labels[i] != k) continue;
      confs.push_back(pred.confidences[i]);
      hits.push_back(correct[i]);
    }
    row.support = confs.size();
    if (row.support > 0) {
      const auto support = static_cast<double>(row.support);
      double cs = 0.0;
      std::size_t hit_count = 0;
      for (std::size_t i = 0; i < confs.size(); ++i) {
        cs += confs[i];
        hit_count += hits[i] ? 1 : 0;
      }
      row.avg_conf = cs / support;
      row.acc = static_cast<double>(hit_count) / support;
      row.delta_acc = row.avg_conf - row.acc;
      row.ece = ece(reliability_bins(confs, hits, bins), row.support);
    }
    r.per_class.push_back(std::move(row));
  }
  return r;
}

std::string report_to_json(const CalibrationReport& report) {
  json j;
  j["ece"] = report.ece;
  j["brier"] = report.brier;
  j["nll"] = report.nll;
  j["accuracy"] = report.accuracy;
  j["mean_confidence"] = report.mean_confidence;
  j["n_total"] = report.n_total;
  json bins = json::array();
  for (const auto& b : report.bins) {
    bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"avg_conf", b.avg_conf}, {"acc", b.acc}});
  }
  j["bins"] = std::move(bins);
  json rows = json::array();
  for (const auto& r : report.per_class) {
    const bool measured = r.support > 0;
    rows.push_back({{"index", r.index},
                    {"name", r.name ? json(*r.name) : json(nullptr)},
                    {"support", r.support},
                    {"acc", nullable(r.acc, measured)},
                    {"avg_conf", nullable(r.avg_conf, measured)},
                    {"delta_acc", nullable(r.delta_acc, measured)},
                    {"ece", nullable(r.ece, measured)}});
  }
  j["per_class"] = std::move(rows);
  j["confidences"] = report.confidences;
  return j.dump(2) + "\n";
}

CalibrationReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("report: invalid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw DataError("report: expected a JSON object");
  for (const char* key : {"ece", "brier", "nll", "accuracy"}) {
    if (!j.contains(key) || !j[key].is_number()) throw DataError(fmt::format("report: \"{}\" must be a number", key));
  }

  CalibrationReport r;
  r.ece = j["ece"].get<double>();
  r.brier = j["brier"].get<double>();
  r.nll = j["nll"].get<double>();
  r.accuracy = j["accuracy"].get<double>();
  r.mean_confidence = number_or_zero(j, "mean_confidence");
  r.n_total = count_field(j, "n_total");

  if (!j.contains("bins") || !j["bins"].is_array() || j["bins"].empty()) {
    throw DataError("report: \"bins\" must be a non-empty array");
  }
  for (const auto& b : j["bins"]) {
    BinStats s;
    s.lo = number_or_zero(b, "lo");
    s.hi = number_or_zero(b, "hi");
    s.count = count_field(b, "count");
    s.avg_conf = number_or_zero(b, "avg_conf");
    s.acc = number_or_zero(b, "acc");
    r.bins.push_back(s);
  }
  if (j.contains("per_class") && j["per_class"].is_array()) {
    for (const auto& row : j["per_class"]) {
      PerClassRow p;
      p.index = count_field(row, "index");
      if (row.contains("name") && row["name"].is_string()) p.name = row["name"].get<std::string>();
      p.support = count_field(row, "support");
      p.acc = number_or_zero(row, "acc");
      p.avg_conf = number_or_zero(row, "avg_conf");
      p.delta_acc = number_or_zero(row, "delta_acc");
      p.ece = number_or_zero(row, "ece");
      r.per_class.push_back(std::move(p));
    }
  }
  if (j.contains("confidences") && j["confidences"].is_array()) {
    for (const auto& c : j["confidences"]) {
      if (!c.is_number()) throw DataError("report: \"confidences\" must contain numbers");
      r.confidences.push_back(c.get<double>());
    }
  }
  return r;
}

}  // namespace caring
