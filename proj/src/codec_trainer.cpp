#include "tats/codec_trainer.hpp"

#include "tats/checkpoint.hpp"
#include "tats/error.hpp"

#include <cmath>
#include <sstream>

namespace tats {

namespace {

void require_finite(const torch::Tensor& value, const char* term) {
  if (!std::isfinite(value.item<double>())) {
    throw DivergenceError(std::string("non-finite ") + term + " in codec training step");
  }
}

Json adam_json(const AdamConfig& a) {
  return Json{{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}, {"weight_decay", a.weight_decay}};
}

AdamConfig adam_from_json(const Json& j, const std::string& ctx, AdamConfig a) {
  StrictReader r(j, ctx);
  r.read("lr", a.lr).read("beta1", a.beta1).read("beta2", a.beta2).read("eps", a.eps).read("weight_decay",
                                                                                            a.weight_decay);
  r.finish();
  return a;
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_rec < 0 || lambda_match < 0 || lambda_disc < 0 || beta < 0 || lambda_perceptual < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (gan_start_step < 0) throw ConfigError("gan_start_step must be non-negative");
}

Json to_json(const CodecTrainConfig& c) {
  return Json{{"lambda_rec", c.weights.lambda_rec},
              {"lambda_match", c.weights.lambda_match},
              {"lambda_disc", c.weights.lambda_disc},
              {"beta", c.weights.beta},
              {"lambda_perceptual", c.weights.lambda_perceptual},
              {"gan_start_step", c.weights.gan_start_step},
              {"gen_optim", adam_json(c.gen_optim)},
              {"disc_optim", adam_json(c.disc_optim)},
              {"clip_norm", c.clip_norm},
              {"accumulate", c.accumulate},
              {"spatial_frames", c.spatial_frames},
              {"init_codebook_from_data", c.init_codebook_from_data},
              {"seed", c.seed}};
}

CodecTrainConfig codec_train_config_from_json(const Json& j) {
  CodecTrainConfig c;
  StrictReader r(j, "adversarial");
  r.read("lambda_rec", c.weights.lambda_rec)
      .read("lambda_match", c.weights.lambda_match)
      .read("lambda_disc", c.weights.lambda_disc)
      .read("beta", c.weights.beta)
      .read("lambda_perceptual", c.weights.lambda_perceptual)
      .read("gan_start_step", c.weights.gan_start_step)
      .read("clip_norm", c.clip_norm)
      .read("accumulate", c.accumulate)
      .read("spatial_frames", c.spatial_frames)
      .read("init_codebook_from_data", c.init_codebook_from_data)
      .read("seed", c.seed);
  if (const auto* g = r.child("gen_optim")) c.gen_optim = adam_from_json(*g, "adversarial.gen_optim", c.gen_optim);
  if (const auto* d = r.child("disc_optim")) c.disc_optim = adam_from_json(*d, "adversarial.disc_optim", c.disc_optim);
  r.finish();
  c.weights.validate();
  if (c.accumulate < 1 || c.spatial_frames < 1 || !(c.clip_norm > 0)) {
    throw ConfigError("accumulate, spatial_frames and clip_norm must be positive");
  }
  return c;
}

Json StepLog::to_json() const {
  return Json{{"step", step},         {"l_rec", l_rec},         {"l_commit", l_commit},
              {"l_codebook", l_codebook}, {"l_match", l_match}, {"l_gan_gen", l_gan_gen},
              {"l_disc_s", l_disc_s}, {"l_disc_t", l_disc_t}, {"grad_norm", grad_norm}};
}

CodecTrainer::CodecTrainer(VideoCodec& codec, DiscriminatorPair& discs, const CodecTrainConfig& config,
                           LayerFeatureNet* perceptual)
    : codec_(codec),
      discs_(discs),
      config_(config),
      perceptual_(perceptual),
      gen_opt_(codec.parameters(), config.gen_optim),
      disc_opt_(discs.parameters(), config.disc_optim),
      rng_(config.seed) {
  config_.weights.validate();
}

torch::Tensor CodecTrainer::sample_frame_indices(int64_t batch, int64_t frames) {
  std::uniform_int_distribution<int64_t> pick(0, frames - 1);
  auto idx = torch::empty({batch * config_.spatial_frames}, torch::kInt64);
  auto* p = idx.data_ptr<int64_t>();
  for (int64_t i = 0; i < idx.numel(); ++i) p[i] = pick(rng_);
  return idx;
}

GeneratorTerms CodecTrainer::generator_terms(const torch::Tensor& batch, const torch::Tensor& frame_indices,
                                             bool gan_active) {
  const auto& w = config_.weights;
  GeneratorTerms t;
  t.latents = codec_.encode(batch);
  if (!torch::isfinite(t.latents).all().item<bool>()) throw DivergenceError("non-finite encoder latents feeding L_commit");
  t.quantized = codec_.quantize(t.latents);
  t.fake = codec_.decode(t.quantized.straight_through);
  t.rec = (batch - t.fake).abs().mean();
  t.codebook = t.quantized.codebook_loss;
  t.commit = t.quantized.commit_loss;
  auto zero = torch::zeros({}, t.rec.options());
  t.match = w.lambda_match > 0 ? feature_matching_loss(batch, t.fake, discs_, frame_indices) : zero;
  t.gan = zero;
  if (gan_active && w.lambda_disc > 0) t.gan = gan_losses(batch, t.fake, discs_, frame_indices).gen_total();
  t.perceptual = w.lambda_perceptual > 0 ? perceptual_loss(batch, t.fake, perceptual_) : zero;
  t.total = w.lambda_rec * t.rec + t.codebook + w.beta * t.commit + w.lambda_match * t.match + w.lambda_disc * t.gan +
            w.lambda_perceptual * t.perceptual;
  return t;
}

StepLog CodecTrainer::step(const std::vector<torch::Tensor>& micro_batches) {
  if (micro_batches.empty()) throw std::invalid_argument("codec train step needs at least one micro-batch");
  for (const auto& mb : micro_batches) {
    if (mb.sizes() != micro_batches.front().sizes()) throw std::invalid_argument("micro-batch shapes differ");
  }
  const auto& w = config_.weights;
  const bool gan_active = step_ >= w.gan_start_step && w.lambda_disc > 0;
  const double n = static_cast<double>(micro_batches.size());
  codec_.train(true);

  if (config_.init_codebook_from_data && !codebook_initialised_ && step_ == 0) {
    torch::NoGradGuard no_grad;
    codec_.codebook().init_from(codec_.encode(micro_batches.front()), config_.seed);
  }
  codebook_initialised_ = true;

  StepLog log;
  log.step = step_;
  std::vector<torch::Tensor> fakes;
  std::vector<torch::Tensor> frame_choices;

  // Generator side. Discriminator weights are frozen so this pass leaves
  // their gradients untouched.
  discs_.set_requires_grad(false);
  gen_opt_.zero_grad();
  for (const auto& batch : micro_batches) {
    auto frames = sample_frame_indices(batch.size(0), batch.size(2));
    auto terms = generator_terms(batch, frames, gan_active);
    require_finite(terms.rec, "L_rec");
    require_finite(terms.commit, "L_commit");
    require_finite(terms.codebook, "L_codebook");
    require_finite(terms.match, "L_match");
    require_finite(terms.gan, "L_gan_gen");
    require_finite(terms.perceptual, "L_perceptual");
    (terms.total / n).backward();
    codebook_ema_update(codec_.codebook(), terms.latents.detach(), terms.quantized.tokens);

    log.l_rec += terms.rec.item<double>() / n;
    log.l_commit += terms.commit.item<double>() / n;
    log.l_codebook += terms.codebook.item<double>() / n;
    log.l_match += terms.match.item<double>() / n;
    log.l_gan_gen += terms.gan.item<double>() / n;
    fakes.push_back(terms.fake.detach());
    frame_choices.push_back(frames);
  }
  log.grad_norm = clip_grad_norm(gen_opt_.params(), config_.clip_norm);
  gen_opt_.step();
  discs_.set_requires_grad(true);

  // Discriminator side, on reconstructions detached from the generator.
  if (gan_active) {
    disc_opt_.zero_grad();
    for (size_t i = 0; i < micro_batches.size(); ++i) {
      auto losses = gan_losses(micro_batches[i], fakes[i], discs_, frame_choices[i]);
      require_finite(losses.disc_spatial, "L_disc (spatial)");
      require_finite(losses.disc_temporal, "L_disc (temporal)");
      (-w.lambda_disc * losses.disc_total() / n).backward();
      log.l_disc_s += losses.disc_spatial.item<double>() / n;
      log.l_disc_t += losses.disc_temporal.item<double>() / n;
    }
    clip_grad_norm(disc_opt_.params(), config_.clip_norm);
    disc_opt_.step();
  }

  for (const auto& p : gen_opt_.params()) {
    if (!torch::isfinite(p).all().item<bool>()) throw DivergenceError("non-finite codec parameters after step");
  }
  ++step_;
  return log;
}

void CodecTrainer::save(Checkpoint& ckpt) const {
  gen_opt_.save(ckpt, "opt.gen.");
  disc_opt_.save(ckpt, "opt.disc.");
  std::ostringstream rng_state;
  rng_state << rng_;
  ckpt.metadata["step"] = step_;
  ckpt.metadata["frame_rng"] = rng_state.str();
  ckpt.metadata["train_config"] = to_json(config_);
}

void CodecTrainer::load(const Checkpoint& ckpt) {
  gen_opt_.load(ckpt, "opt.gen.");
  disc_opt_.load(ckpt, "opt.disc.");
  step_ = ckpt.metadata.at("step").get<int64_t>();
  std::istringstream rng_state(ckpt.metadata.at("frame_rng").get<std::string>());
  rng_state >> rng_;
  codebook_initialised_ = true;
}

}  // namespace tats
