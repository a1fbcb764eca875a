#include "caring/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "caring/error.hpp"

namespace caring {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidArgument(
        fmt::format("matrix data has {} entries, expected {}x{}", data_.size(), rows_, cols_));
  }
}

std::string Matrix::shape_string() const { return fmt::format("{}x{}", rows_, cols_); }

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("empty input");
  double hi = v[0];
  for (double x : v) hi = std::max(hi, x);
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

Vector log_softmax(std::span<const double> v) {
  const double lse = log_sum_exp(v);
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

Vector softmax(std::span<const double> v) {
  Vector out = log_softmax(v);
  for (double& x : out) x = std::exp(x);
  return out;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Vector mat_vec(const Matrix& m, std::span<const double> v) {
  if (m.cols() != v.size()) {
    throw InvalidArgument(
        fmt::format("mat_vec shape mismatch: matrix {} vs vector {}", m.shape_string(), v.size()));
  }
  Vector out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

Prng::Prng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& word : s_) word = splitmix64(x);
}

std::uint64_t Prng::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Prng::next_unit() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Prng::next_below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("next_below: n must be positive");
  // Lemire's multiply-shift with rejection; unbiased.
  std::uint64_t x = next_u64();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<unsigned __int128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Prng::uniform(double lo, double hi) {
  if (!(lo < hi)) throw InvalidArgument(fmt::format("uniform: need lo < hi, got [{}, {})", lo, hi));
  const double x = lo + (hi - lo) * next_unit();
  // Rounding can land exactly on hi for wide ranges.
  return x < hi ? x : std::nextafter(hi, lo);
}

double Prng::normal(double mu, double sigma) {
  if (!(sigma >= 0.0)) throw InvalidArgument(fmt::format("normal: sigma must be >= 0, got {}", sigma));
  const double u1 = 1.0 - next_unit();  // (0, 1]
  const double u2 = next_unit();
  if (sigma == 0.0) return mu;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  return mu + sigma * radius * std::cos(2.0 * std::numbers::pi * u2);
}

void Prng::jump() noexcept {
  static constexpr std::uint64_t kJump[] = {0x180ec6d33cfd0abaULL, 0xd5a61266f0c9392cULL,
                                            0xa9582618e03fc9aaULL, 0x39abdc4529b1661cULL};
  std::array<std::uint64_t, 4> acc{};
  for (std::uint64_t word : kJump) {
    for (int b = 0; b < 64; ++b) {
      if (word & (std::uint64_t{1} << b)) {
        for (std::size_t i = 0; i < 4; ++i) acc[i] ^= s_[i];
      }
      next_u64();
    }
  }
  s_ = acc;
}

}  // namespace caring
