#pragma once

// Dense row-major matrices, stable softmax transforms and the seeded PRNG
// shared by every other module. All reductions run left to right so results
// are bit-stable between runs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace caring {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Takes ownership of row-major `data`; throws InvalidArgument if its size is not rows*cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// log(sum(exp(v))) via max subtraction. Throws InvalidArgument("empty input") on empty v.
double log_sum_exp(std::span<const double> v);

Vector softmax(std::span<const double> v);
Vector log_softmax(std::span<const double> v);

// Lowest index wins ties.
std::size_t argmax(std::span<const double> v);

Vector mat_vec(const Matrix& m, std::span<const double> v);

bool all_finite(std::span<const double> v) noexcept;

// xoshiro256** seeded through splitmix64. The stream for a given seed is
// fixed by this code alone (no <random> distributions), so it is identical
// across platforms and standard libraries.
class Prng {
 public:
  explicit Prng(std::uint64_t seed);

  std::uint64_t next_u64() noexcept;

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() noexcept;

  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  double uniform(double lo, double hi);

  // Box-Muller, cosine branch. Always consumes exactly two next_unit() draws,
  // so stream position does not depend on sigma; sigma == 0 returns mu exactly.
  double normal(double mu, double sigma);

  // Advances the state by 2^128 steps; used to derive non-overlapping substreams.
  void jump() noexcept;

  const std::array<std::uint64_t, 4>& state() const noexcept { return s_; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace caring
