#pragma once

// On-disk sample format.
//
// A dataset is described by a JSON manifest
//
//   { "logits": "logits.csv", "labels": "labels.csv",
//     "features": "features.csv" | null, "class_names": ["a", "b", ...] | null }
//
// with paths resolved relative to the manifest. Matrix files are UTF-8 CSV,
// one sample per line, '.' decimal point, optionally preceded by a single
// header line (detected by a non-numeric first token). Labels are a single
// column of integer class indices.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "caring/numerics.hpp"

namespace caring {

struct SampleSet {
  Matrix logits;                                       // N x m
  std::vector<std::size_t> labels;                     // N entries in [0, m)
  std::optional<Matrix> features;                      // N x d
  std::optional<std::vector<std::string>> class_names; // m entries

  std::size_t size() const noexcept { return logits.rows(); }
  std::size_t num_classes() const noexcept { return logits.cols(); }
  std::size_t feature_dim() const noexcept { return features ? features->cols() : 0; }

  // Checks the cross-field invariants; throws DataError.
  void validate() const;
};

struct Manifest {
  std::filesystem::path logits;
  std::filesystem::path labels;
  std::optional<std::filesystem::path> features;
  std::optional<std::vector<std::string>> class_names;
};

Manifest read_manifest(const std::filesystem::path& manifest_path);

// Parses a numeric CSV; every value must be finite. Errors name file, row and column.
Matrix read_matrix_csv(const std::filesystem::path& path);
std::vector<long long> read_labels_csv(const std::filesystem::path& path);

SampleSet load_sampleset(const std::filesystem::path& manifest_path);

// Throws DataError if the splits disagree on class count or feature dimension.
void validate_pair(const SampleSet& val, const SampleSet& test);

// Shortest round-trip decimal form; parsing it back yields the same bits.
std::string format_double(double x);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header = {});
void write_labels_csv(const std::filesystem::path& path, const std::vector<std::size_t>& labels);

// Writes manifest.json, logits.csv, labels.csv and (if present) features.csv into `dir`.
void write_sampleset(const std::filesystem::path& dir, const SampleSet& set);

}  // namespace caring
