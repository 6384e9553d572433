#pragma once

#include "tats/classifier.hpp"
#include "tats/codec.hpp"
#include "tats/codec_trainer.hpp"
#include "tats/discriminator.hpp"
#include "tats/json_util.hpp"
#include "tats/prior_trainer.hpp"
#include "tats/sampler.hpp"
#include "tats/transformer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace tats {

inline constexpr const char* kToolVersion = "tats-desk 0.1.0";

struct DataConfig {
  int64_t n_videos = 64;
  int64_t length = 128;
  int64_t height = 16;
  int64_t width = 16;
  int64_t channels = 1;
  int64_t n_classes = 4;
  int64_t period = 8;
  double sigma = 1.5;
  // Codec training windows.
  int64_t clip_length = 16;
  int64_t frame_stride = 1;
  bool random_offsets = true;
};

struct CodecRunConfig {
  int64_t steps = 2000;
  int64_t batch_size = 8;
  int64_t log_every = 50;
  int64_t checkpoint_every = 500;
};

struct PriorRunConfig {
  int64_t n_layers = 2;
  int64_t n_heads = 4;
  int64_t embed_dim = 64;
  double dropout = 0.0;
  // Slices per training sequence (t); clip_length / temporal_rate by default.
  int64_t train_slices = 0;
  int64_t anchor_interval = 4;
  bool conditional = true;
  PriorTrainConfig training;
};

struct GenerateConfig {
  int64_t n_videos = 64;
  int64_t frames = 128;
  std::string mode = "base";
  SamplerConfig sampler;
  SamplerConfig interp_sampler{1.0, 0, 0.9, 0};
  bool write_gifs = true;
};

struct EvalConfig {
  // "classifier" (penultimate layer of the trained clip classifier) or "random".
  std::string extractor = "classifier";
  int64_t hist_bins = 16;
  ClassifierConfig classifier;
  int64_t bootstrap_replicates = 1000;
};

struct RunConfig {
  uint64_t seed = 0;
  std::string out = "run";
  DataConfig data;
  CodecConfig codec;
  DiscriminatorConfig discriminator;
  CodecTrainConfig adversarial;
  CodecRunConfig codec_training;
  PriorRunConfig prior;
  GenerateConfig generate;
  EvalConfig eval;

  void validate() const;
  int64_t train_slices() const;
};

Json to_json(const RunConfig& config);
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Stream seed for a named component, derived from the global seed.
uint64_t derive_seed(uint64_t seed, const std::string& tag);

}  // namespace tats
