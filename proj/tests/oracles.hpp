#pragma once

// Test-only reference computations. Deliberately written without touching the
// library's binning, softmax or gradient code paths.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// Re-bins from scratch by scanning every segment against every sample.
inline double brute_force_ece(const std::vector<double>& conf, const std::vector<bool>& correct, std::size_t k) {
  const double n_total = static_cast<double>(conf.size());
  double total = 0.0;
  for (std::size_t b = 0; b < k; ++b) {
    const double lo = static_cast<double>(b) / static_cast<double>(k);
    const double hi = static_cast<double>(b + 1) / static_cast<double>(k);
    double count = 0.0;
    double conf_sum = 0.0;
    double hit_sum = 0.0;
    for (std::size_t i = 0; i < conf.size(); ++i) {
      const bool inside = (conf[i] >= lo && conf[i] < hi) || (b == k - 1 && conf[i] == 1.0);
      if (!inside) continue;
      count += 1.0;
      conf_sum += conf[i];
      hit_sum += correct[i] ? 1.0 : 0.0;
    }
    if (count == 0.0) continue;
    total += count / n_total * std::fabs(hit_sum / count - conf_sum / count);
  }
  return total;
}

// Naive softmax straight from the definition (no max shift); only for modest logits.
inline std::vector<double> naive_softmax(const std::vector<double>& v) {
  double denom = 0.0;
  for (double x : v) denom += std::exp(x);
  std::vector<double> out;
  for (double x : v) out.push_back(std::exp(x) / denom);
  return out;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Relative error with an absolute floor for entries that are zero on both sides
// (e.g. weights behind an inactive relu).
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::fabs(analytic), std::fabs(numeric));
  if (scale < 1e-8) return std::fabs(analytic - numeric);
  return std::fabs(analytic - numeric) / scale;
}

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("caring-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
