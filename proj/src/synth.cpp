#include "caring/synth.hpp"

#include <cmath>

#include <fmt/format.h>

#include "caring/error.hpp"

namespace caring {

namespace {

SynthSplit draw_split(const SynthConfig& cfg, std::size_t n, Prng& rng) {
  const std::size_t m = cfg.classes;
  const std::size_t d = cfg.feature_dim;
  SynthSplit split;
  split.set.logits = Matrix(n, m);
  split.set.features = Matrix(n, d);
  split.set.labels.resize(n);
  split.cluster.resize(n);

  std::vector<std::vector<double>> prototypes;
  for (std::size_t k = 0; k < cfg.clusters; ++k) prototypes.push_back(cluster_prototype(k, cfg.clusters, d));

  Vector u(m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(rng.next_below(cfg.clusters));
    const auto a = static_cast<std::size_t>(rng.next_below(m));
    for (double& x : u) x = rng.normal(0.0, 1.0);
    u[a] += cfg.margin[k];
    const double scale = cfg.sharpness[k] * cfg.margin[k];
    auto logits = split.set.logits.row(i);
    for (std::size_t j = 0; j < m; ++j) logits[j] = scale * u[j];

    auto z = split.set.features->row(i);
    for (std::size_t j = 0; j < d; ++j) z[j] = prototypes[k][j] + rng.normal(0.0, cfg.feature_noise);

    split.set.labels[i] = a;
    split.cluster[i] = k;
  }
  return split;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_val < 1 || n_test < 1) throw InvalidArgument("n_val and n_test must be >= 1");
  if (classes < 2) throw InvalidArgument(fmt::format("classes must be >= 2, got {}", classes));
  if (clusters < 1) throw InvalidArgument("clusters must be >= 1");
  if (sharpness.size() != clusters || margin.size() != clusters) {
    throw InvalidArgument(fmt::format("need {} sharpness and margin values, got {} and {}", clusters,
                                      sharpness.size(), margin.size()));
  }
  for (double s : sharpness) {
    if (!(s >= 1.0) || !std::isfinite(s)) throw InvalidArgument(fmt::format("sharpness must be >= 1, got {}", s));
  }
  for (double mg : margin) {
    if (!(mg >= 0.0) || !std::isfinite(mg)) throw InvalidArgument(fmt::format("margin must be >= 0, got {}", mg));
  }
  if (feature_dim < clusters) {
    throw InvalidArgument(
        fmt::format("feature_dim ({}) must be >= clusters ({})", feature_dim, clusters));
  }
  if (!(feature_noise >= 0.0) || !std::isfinite(feature_noise)) {
    throw InvalidArgument(fmt::format("feature_noise must be >= 0, got {}", feature_noise));
  }
}

std::vector<double> cluster_prototype(std::size_t cluster, std::size_t clusters, std::size_t feature_dim) {
  std::vector<double> z(feature_dim, 0.0);
  // Feature j belongs to block floor(j * c / d).
  for (std::size_t j = 0; j < feature_dim; ++j) {
    if (j * clusters / feature_dim == cluster) z[j] = 1.0;
  }
  return z;
}

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  Prng val_rng(cfg.seed);
  Prng test_rng = val_rng;
  test_rng.jump();
  return SynthData{draw_split(cfg, cfg.n_val, val_rng), draw_split(cfg, cfg.n_test, test_rng)};
}

void write_synth(const std::filesystem::path& out_dir, const SynthData& data) {
  write_sampleset(out_dir / "val", data.val.set);
  write_sampleset(out_dir / "test", data.test.set);
}

}  // namespace caring
