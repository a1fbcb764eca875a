#include "caring/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <json.hpp>

#include "caring/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace caring {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

std::ifstream open_input(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(fmt::format("{}: missing file", path.string()));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("{}: cannot open file", path.string()));
  return in;
}

// Reads non-empty lines, dropping a leading header line whose first token is not numeric.
// Returns (1-based line number, line) pairs.
std::vector<std::pair<std::size_t, std::string>> read_data_lines(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (first && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (first) {
      first = false;
      double ignored = 0.0;
      if (!parse_double(split_commas(line).front(), ignored)) continue;
    }
    lines.emplace_back(lineno, line);
  }
  return lines;
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

}  // namespace

void SampleSet::validate() const {
  const std::size_t n = logits.rows();
  if (n < 1) throw DataError("dataset has no samples");
  if (logits.cols() < 2) throw DataError(fmt::format("need at least 2 classes, got {}", logits.cols()));
  if (labels.size() != n) {
    throw DataError(fmt::format("row count mismatch: {} logit rows vs {} labels", n, labels.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= logits.cols()) {
      throw DataError(fmt::format("label out of range at row {}", i + 1));
    }
  }
  if (features) {
    if (features->rows() != n) {
      throw DataError(
          fmt::format("row count mismatch: {} logit rows vs {} feature rows", n, features->rows()));
    }
    if (features->cols() < 1) throw DataError("features have zero columns");
  }
  if (class_names && class_names->size() != logits.cols()) {
    throw DataError(fmt::format("class_names has {} entries for {} classes", class_names->size(),
                                logits.cols()));
  }
}

Manifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in = open_input(manifest_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: invalid JSON: {}", manifest_path.string(), e.what()));
  }
  if (!j.is_object()) throw DataError(fmt::format("{}: manifest must be an object", manifest_path.string()));

  const fs::path base = manifest_path.parent_path();
  auto required_path = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw DataError(fmt::format("{}: \"{}\" must be a path string", manifest_path.string(), key));
    }
    return resolve(base, j[key].get<std::string>());
  };

  Manifest m;
  m.logits = required_path("logits");
  m.labels = required_path("labels");
  if (j.contains("features") && !j["features"].is_null()) m.features = required_path("features");
  if (j.contains("class_names") && !j["class_names"].is_null()) {
    const auto& names = j["class_names"];
    if (!names.is_array()) {
      throw DataError(fmt::format("{}: \"class_names\" must be an array", manifest_path.string()));
    }
    std::vector<std::string> out;
    for (const auto& n : names) {
      if (!n.is_string()) {
        throw DataError(fmt::format("{}: class_names entries must be strings", manifest_path.string()));
      }
      out.push_back(n.get<std::string>());
    }
    m.class_names = std::move(out);
  }
  return m;
}

Matrix read_matrix_csv(const fs::path& path) {
  const auto lines = read_data_lines(path);
  if (lines.empty()) throw DataError(fmt::format("{}: no data rows", path.string()));

  std::size_t cols = 0;
  std::vector<double> data;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto& [lineno, line] = lines[r];
    const auto tokens = split_commas(line);
    if (r == 0) {
      cols = tokens.size();
    } else if (tokens.size() != cols) {
      throw DataError(fmt::format("{}:{}: expected {} columns, found {}", path.string(), lineno, cols,
                                  tokens.size()));
    }
    for (std::size_t c = 0; c < tokens.size(); ++c) {
      double v = 0.0;
      if (!parse_double(tokens[c], v)) {
        throw DataError(fmt::format("{}: row {}, column {}: not a number: \"{}\"", path.string(), lineno,
                                    c + 1, tokens[c]));
      }
      if (!std::isfinite(v)) {
        throw DataError(fmt::format("{}: row {}, column {}: non-finite value \"{}\"", path.string(),
                                    lineno, c + 1, tokens[c]));
      }
      data.push_back(v);
    }
  }
  return Matrix(lines.size(), cols, std::move(data));
}

std::vector<long long> read_labels_csv(const fs::path& path) {
  const auto lines = read_data_lines(path);
  if (lines.empty()) throw DataError(fmt::format("{}: no data rows", path.string()));
  std::vector<long long> labels;
  labels.reserve(lines.size());
  for (const auto& [lineno, line] : lines) {
    const auto tokens = split_commas(line);
    if (tokens.size() != 1) {
      throw DataError(fmt::format("{}:{}: expected a single label column, found {}", path.string(), lineno,
                                  tokens.size()));
    }
    std::string_view tok = tokens[0];
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || tok.empty()) {
      throw DataError(
          fmt::format("{}: row {}, column 1: not an integer label: \"{}\"", path.string(), lineno, tokens[0]));
    }
    labels.push_back(v);
  }
  return labels;
}

SampleSet load_sampleset(const fs::path& manifest_path) {
  const Manifest manifest = read_manifest(manifest_path);

  SampleSet set;
  set.logits = read_matrix_csv(manifest.logits);
  const auto raw_labels = read_labels_csv(manifest.labels);
  if (manifest.features) set.features = read_matrix_csv(*manifest.features);
  set.class_names = manifest.class_names;

  const std::size_t n = set.logits.rows();
  const std::size_t m = set.logits.cols();
  if (raw_labels.size() != n) {
    throw DataError(fmt::format("row count mismatch: {} has {} rows, {} has {} rows",
                                manifest.logits.string(), n, manifest.labels.string(), raw_labels.size()));
  }
  if (set.features && set.features->rows() != n) {
    throw DataError(fmt::format("row count mismatch: {} has {} rows, {} has {} rows",
                                manifest.logits.string(), n, manifest.features->string(),
                                set.features->rows()));
  }
  set.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (raw_labels[i] < 0 || static_cast<unsigned long long>(raw_labels[i]) >= m) {
      throw DataError(fmt::format("{}: label out of range at row {} (value {}, classes {})",
                                  manifest.labels.string(), i + 1, raw_labels[i], m));
    }
    set.labels.push_back(static_cast<std::size_t>(raw_labels[i]));
  }
  set.validate();
  return set;
}

void validate_pair(const SampleSet& val, const SampleSet& test) {
  if (val.num_classes() != test.num_classes()) {
    throw DataError(fmt::format("class count mismatch: validation has {}, test has {}", val.num_classes(),
                                test.num_classes()));
  }
  if (val.features.has_value() != test.features.has_value()) {
    throw DataError("feature presence mismatch between validation and test splits");
  }
  if (val.feature_dim() != test.feature_dim()) {
    throw DataError(fmt::format("feature dimension mismatch: validation has {}, test has {}",
                                val.feature_dim(), test.feature_dim()));
  }
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void write_matrix_csv(const fs::path& path, const Matrix& m, const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("{}: cannot open for writing", path.string()));
  if (!header.empty()) out << fmt::format("{}\n", fmt::join(header, ","));
  std::string line;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    line.clear();
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) line += ',';
      line += format_double(m(r, c));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw DataError(fmt::format("{}: write failed", path.string()));
}

void write_labels_csv(const fs::path& path, const std::vector<std::size_t>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("{}: cannot open for writing", path.string()));
  for (std::size_t label : labels) out << label << '\n';
  if (!out) throw DataError(fmt::format("{}: write failed", path.string()));
}

void write_sampleset(const fs::path& dir, const SampleSet& set) {
  set.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(fmt::format("{}: cannot create directory: {}", dir.string(), ec.message()));

  write_matrix_csv(dir / "logits.csv", set.logits);
  write_labels_csv(dir / "labels.csv", set.labels);
  json manifest = {{"logits", "logits.csv"}, {"labels", "labels.csv"}};
  if (set.features) {
    write_matrix_csv(dir / "features.csv", *set.features);
    manifest["features"] = "features.csv";
  } else {
    manifest["features"] = nullptr;
  }
  manifest["class_names"] = set.class_names ? json(*set.class_names) : json(nullptr);

  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("{}: cannot open for writing", (dir / "manifest.json").string()));
  out << manifest.dump(2) << '\n';
}

}  // namespace caring
