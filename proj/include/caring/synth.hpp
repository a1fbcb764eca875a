#pragma once

// Synthetic classifier outputs with known miscalibration.
//
// Per sample: cluster k ~ U{0..c-1}, label a ~ U{0..m-1}, u ~ N(0, I_m) with
// u[a] += margin_k. The Bayes posterior of this process is softmax(margin_k * u),
// so the emitted logits y = sharpness_k * margin_k * u are calibrated at
// sharpness 1 and need temperature sharpness_k to be corrected. Features are
// onehot(k) stretched to feature_dim by block repetition plus N(0, noise^2).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "caring/dataset.hpp"

namespace caring {

struct SynthConfig {
  std::size_t n_val = 1000;
  std::size_t n_test = 1000;
  std::size_t classes = 5;
  std::size_t clusters = 1;
  std::vector<double> sharpness{1.0};
  std::vector<double> margin{2.0};
  std::size_t feature_dim = 16;
  double feature_noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthSplit {
  SampleSet set;
  std::vector<std::size_t> cluster;  // generating cluster per sample
};

struct SynthData {
  SynthSplit val;
  SynthSplit test;
};

// Validation draws from Prng(seed); test from the same generator advanced by one jump().
SynthData generate(const SynthConfig& cfg);

// Noise-free feature vector of cluster k.
std::vector<double> cluster_prototype(std::size_t cluster, std::size_t clusters, std::size_t feature_dim);

// Writes out_dir/val and out_dir/test in the dataset format.
void write_synth(const std::filesystem::path& out_dir, const SynthData& data);

}  // namespace caring
