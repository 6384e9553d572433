#pragma once

#include "tats/codec.hpp"
#include "tats/discriminator.hpp"
#include "tats/json_util.hpp"
#include "tats/losses.hpp"
#include "tats/optim.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

namespace tats {

struct LossWeights {
  double lambda_rec = 4.0;
  double lambda_match = 4.0;
  double lambda_disc = 1.0;
  double beta = 0.25;
  // Weight of the optional perceptual term (0 disables it).
  double lambda_perceptual = 0.0;
  int64_t gan_start_step = 10000;

  void validate() const;
};

struct CodecTrainConfig {
  LossWeights weights;
  AdamConfig gen_optim;
  AdamConfig disc_optim;
  double clip_norm = 1.0;
  // Micro-batches accumulated per optimizer step.
  int64_t accumulate = 6;
  // Random frames per clip shown to the spatial discriminator.
  int64_t spatial_frames = 1;
  // Seed the codebook from the first batch's encoder outputs.
  bool init_codebook_from_data = true;
  uint64_t seed = 0;
};

Json to_json(const CodecTrainConfig& config);
CodecTrainConfig codec_train_config_from_json(const Json& j);

// Per-term values of one generator objective evaluation.
struct GeneratorTerms {
  torch::Tensor rec;
  torch::Tensor codebook;
  torch::Tensor commit;
  torch::Tensor match;
  torch::Tensor gan;
  torch::Tensor perceptual;
  torch::Tensor total;
  torch::Tensor fake;
  QuantizeResult quantized;
  torch::Tensor latents;
};

struct StepLog {
  int64_t step = 0;
  double l_rec = 0;
  double l_commit = 0;
  double l_codebook = 0;
  double l_match = 0;
  double l_gan_gen = 0;
  double l_disc_s = 0;
  double l_disc_t = 0;
  // Generator-side gradient norm actually applied (after clipping).
  double grad_norm = 0;

  Json to_json() const;
};

// Alternating generator / discriminator updates for the codec:
//   generator:     lambda_rec L_rec + L_codebook + beta L_commit
//                  + lambda_match L_match + lambda_disc L_gan (from gan_start_step)
//                  [+ lambda_perceptual L_perc]
//   discriminator: maximise lambda_disc L_disc on the detached reconstructions
// Codebook rows follow EMA updates; L_codebook is carried for logging only.
class CodecTrainer {
 public:
  CodecTrainer(VideoCodec& codec, DiscriminatorPair& discs, const CodecTrainConfig& config,
               LayerFeatureNet* perceptual = nullptr);

  // One optimizer step over the given micro-batches (B x C x T x H x W each).
  StepLog step(const std::vector<torch::Tensor>& micro_batches);

  // Evaluates the generator objective on one batch without side effects on
  // the codebook. `gan_active` controls the generator GAN term.
  GeneratorTerms generator_terms(const torch::Tensor& batch, const torch::Tensor& frame_indices, bool gan_active);

  torch::Tensor sample_frame_indices(int64_t batch, int64_t frames);

  int64_t current_step() const { return step_; }
  Adam& gen_optimizer() { return gen_opt_; }
  Adam& disc_optimizer() { return disc_opt_; }
  const CodecTrainConfig& config() const { return config_; }

  void save(Checkpoint& ckpt) const;
  void load(const Checkpoint& ckpt);

 private:
  VideoCodec& codec_;
  DiscriminatorPair& discs_;
  CodecTrainConfig config_;
  LayerFeatureNet* perceptual_;
  Adam gen_opt_;
  Adam disc_opt_;
  std::mt19937_64 rng_;
  int64_t step_ = 0;
  bool codebook_initialised_ = false;
};

}  // namespace tats
