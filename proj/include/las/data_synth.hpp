#pragma once

#include "las/vocab.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace las {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;

struct SynthConfig {
  std::uint64_t seed = 1;
  int frames_min = 4;
  int frames_max = 10;
  int feature_dim = 40;
  float template_amplitude = 2.0f;
  float noise_sigma = 0.1f;
};

struct ManifestEntry {
  std::string utt_id;
  std::string path;       // relative to the corpus root
  std::string transcript; // normalized
};

using Manifest = std::vector<ManifestEntry>;

/// Fixed two-hot template for one vocabulary symbol: distinct coordinate
/// pairs per symbol so templates are pairwise separated.
Eigen::VectorXf character_template(const SynthConfig& cfg, int symbol_index);

/// Renders normalized text as features: each character emits
/// n ~ Uniform[frames_min, frames_max] frames of its template plus Gaussian
/// noise. Deterministic given (config, text, seed material in rng).
FeatureMatrix synth_utterance(const SynthConfig& cfg, const Vocabulary& vocab,
                              const std::string& text, std::mt19937_64& rng);

/// Per-utterance RNG derived from (seed, utt_id) so generation order and
/// parallelism do not change outputs.
std::mt19937_64 utterance_rng(std::uint64_t seed, const std::string& utt_id);

/// Writes one feature file per text under root/feats/ and a manifest TSV.
/// Returns the manifest with paths relative to root.
Manifest gen_corpus(const SynthConfig& cfg, const Vocabulary& vocab,
                    const std::vector<std::string>& texts,
                    const std::string& root, const std::string& prefix = "utt");

void write_features(const std::string& path, const FeatureMatrix& feats);
FeatureMatrix read_features(const std::string& path);

void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

/// Loads every feature matrix referenced by a manifest rooted at `root`.
std::vector<FeatureMatrix> load_features(const Manifest& manifest,
                                         const std::string& root);

/// Built-in word list (all length <= 8, normalized) for corpus generation.
const std::vector<std::string>& builtin_words();

}  // namespace las
