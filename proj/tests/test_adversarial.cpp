#include "tats/checkpoint.hpp"
#include "tats/codec_trainer.hpp"
#include "tats/error.hpp"
#include "tats/losses.hpp"
#include "tats/optim.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tats;
using tats::testing::bit_equal;

namespace {

CodecConfig micro_codec() {
  CodecConfig c;
  c.temporal_rate = 2;
  c.spatial_rate = 2;
  c.base_channels = 4;
  c.n_layers = 1;
  c.embed_dim = 4;
  c.codebook_size = 8;
  return c;
}

torch::Tensor random_clips(int64_t b, int64_t t = 8, int64_t hw = 8) {
  return torch::rand({b, 1, t, hw, hw}) * 2 - 1;
}

std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  for (const auto& p : params) out.push_back(p.detach().clone());
  return out;
}

bool unchanged(const std::vector<torch::Tensor>& before, const std::vector<torch::Tensor>& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    if (!torch::equal(before[i], params[i].detach())) return false;
  }
  return true;
}

}  // namespace

TEST(GanLosses, HalfProbabilityGivesMinusTwoLn2) {
  auto zeros = torch::zeros({3, 4}, torch::kFloat64);
  EXPECT_NEAR(disc_objective(zeros, zeros).item<double>(), -2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(generator_gan_term(zeros).item<double>(), std::log(2.0), 1e-12);
}

TEST(GanLosses, PerfectDiscriminatorLimit) {
  auto real = torch::full({4}, 40.0, torch::kFloat64);
  auto fake = torch::full({4}, -40.0, torch::kFloat64);
  const double d = disc_objective(real, fake).item<double>();
  EXPECT_LT(d, 0.0);
  EXPECT_GT(d, -1e-12);
  EXPECT_NEAR(generator_gan_term(fake).item<double>(), 40.0, 1e-9);
  // Stable for logits where a naive log(sigmoid) underflows.
  EXPECT_TRUE(std::isfinite(generator_gan_term(torch::full({1}, -1000.0, torch::kFloat64)).item<double>()));
}

TEST(GanLosses, IdenticalInputsGiveConsistentTerms) {
  torch::manual_seed(1);
  DiscriminatorPair discs(DiscriminatorConfig{1, 4});
  auto x = random_clips(2);
  auto frames = torch::tensor({1, 5}, torch::kInt64);
  auto l = gan_losses(x, x, discs, frames);
  auto s = discs.spatial->forward(select_frames(x, frames)).logits;
  auto t = discs.temporal->forward(x).logits;
  EXPECT_NEAR(l.disc_spatial.item<double>(), disc_objective(s, s).item<double>(), 1e-6);
  EXPECT_NEAR(l.disc_temporal.item<double>(), disc_objective(t, t).item<double>(), 1e-6);
  EXPECT_NEAR(l.gen_spatial.item<double>(), generator_gan_term(s).item<double>(), 1e-6);
}

TEST(GanLosses, NonFiniteLogitsRaise) {
  DiscriminatorPair discs(DiscriminatorConfig{1, 4});
  auto x = random_clips(1);
  auto bad = x.clone();
  bad.view({-1})[0] = NAN;
  EXPECT_THROW(gan_losses(x, bad, discs, torch::tensor({0}, torch::kInt64)), DivergenceError);
}

TEST(FeatureMatching, ConstantOffsetOfOneGivesOne) {
  auto a = torch::zeros({7}, torch::kFloat64);
  EXPECT_NEAR(feature_matching({a}, {a + 1.0}).item<double>(), 1.0, 1e-12);
  EXPECT_NEAR(feature_matching({a, torch::zeros({2, 3})}, {a + 1.0, torch::ones({2, 3})}).item<double>(), 2.0, 1e-6);
}

TEST(FeatureMatching, ZeroOnIdenticalAndMonotoneAlongLine) {
  torch::manual_seed(2);
  DiscriminatorPair discs(DiscriminatorConfig{1, 4});
  discs.to(torch::kFloat64);
  auto real = random_clips(2).to(torch::kFloat64);
  auto far = random_clips(2).to(torch::kFloat64);
  auto frames = torch::tensor({0, 3}, torch::kInt64);
  EXPECT_EQ(feature_matching_loss(real, real, discs, frames).item<double>(), 0.0);
  double prev = INFINITY;
  for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    auto fake = far + a * (real - far);
    const double v = feature_matching_loss(real, fake, discs, frames).item<double>();
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_EQ(prev, 0.0);
}

TEST(Perceptual, ZeroOnIdenticalPositiveOtherwiseAndOffWhenMissing) {
  torch::manual_seed(3);
  RandomConvFeatures net(1, 4, 2, 11);
  auto a = random_clips(1), b = random_clips(1);
  EXPECT_EQ(perceptual_loss(a, a, &net).item<double>(), 0.0);
  EXPECT_GT(perceptual_loss(a, b, &net).item<double>(), 0.0);
  EXPECT_EQ(perceptual_loss(a, b, nullptr).item<double>(), 0.0);
}

TEST(Perceptual, DisabledTermMatchesTrainingWithoutIt) {
  auto run = [](LayerFeatureNet* perceptual) {
    torch::manual_seed(4);
    VideoCodec codec(micro_codec());
    DiscriminatorPair discs(DiscriminatorConfig{1, 4});
    CodecTrainConfig tc;
    tc.accumulate = 1;
    tc.weights.lambda_perceptual = 0;
    CodecTrainer trainer(codec, discs, tc, perceptual);
    torch::manual_seed(5);
    auto x = random_clips(2);
    for (int i = 0; i < 3; ++i) trainer.step({x});
    return snapshot(codec.parameters());
  };
  RandomConvFeatures net(1, 4, 2, 11);
  auto a = run(nullptr), b = run(&net);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(bit_equal(a[i], b[i]));
}

TEST(CodecTrainer, GanGatingBeforeStartStep) {
  torch::manual_seed(6);
  VideoCodec codec(micro_codec());
  DiscriminatorPair discs(DiscriminatorConfig{1, 4});
  CodecTrainConfig tc;
  tc.accumulate = 2;
  tc.weights.gan_start_step = 3;
  CodecTrainer trainer(codec, discs, tc);
  auto disc_before = snapshot(discs.parameters());
  for (int i = 0; i < 3; ++i) {
    auto log = trainer.step({random_clips(2), random_clips(2)});
    EXPECT_EQ(log.l_gan_gen, 0.0);
    EXPECT_EQ(log.l_disc_s, 0.0);
    EXPECT_EQ(log.l_disc_t, 0.0);
    EXPECT_LE(log.grad_norm, 1.0 + 1e-6);
  }
  EXPECT_TRUE(unchanged(disc_before, discs.parameters()));
  auto log = trainer.step({random_clips(2), random_clips(2)});
  EXPECT_NE(log.l_gan_gen, 0.0);
  EXPECT_NE(log.l_disc_s, 0.0);
  EXPECT_FALSE(unchanged(disc_before, discs.parameters()));
  EXPECT_LE(log.grad_norm, 1.0 + 1e-6);
}

TEST(CodecTrainer, ReducesToVqVaeObjectiveWithoutAdversarialTerms) {
  torch::manual_seed(7);
  VideoCodec codec(micro_codec());
  DiscriminatorPair discs(DiscriminatorConfig{1, 4});
  CodecTrainConfig tc;
  tc.weights.lambda_match = 0;
  tc.weights.lambda_disc = 0;
  tc.weights.gan_start_step = 0;
  CodecTrainer trainer(codec, discs, tc);
  auto x = random_clips(2);
  auto terms = trainer.generator_terms(x, torch::tensor({0, 1}, torch::kInt64), true);
  auto vqvae = tc.weights.lambda_rec * (x - terms.fake).abs().mean() + terms.quantized.codebook_loss +
               tc.weights.beta * terms.quantized.commit_loss;
  EXPECT_EQ(terms.total.item<double>(), vqvae.item<double>());
}

TEST(CodecTrainer, OverfitsOneClip) {
  torch::manual_seed(8);
  auto cfg = micro_codec();
  cfg.base_channels = 8;
  cfg.codebook_size = 32;
  VideoCodec codec(cfg);
  DiscriminatorPair discs(DiscriminatorConfig{1, 4});
  CodecTrainConfig tc;
  tc.accumulate = 1;
  tc.gen_optim.lr = 2e-3;
  CodecTrainer trainer(codec, discs, tc);
  auto clip = make_bouncing_blob_dataset(1, 16, {8, 8}, 1, 2)[0].clip;
  auto x = stack_channels_first({clip});
  const double first = trainer.step({x}).l_rec;
  double last = first;
  for (int i = 1; i < 200; ++i) last = trainer.step({x}).l_rec;
  EXPECT_LE(last, 0.5 * first);
}

TEST(CodecTrainer, DeterministicGivenSeeds) {
  auto run = []() {
    torch::manual_seed(9);
    VideoCodec codec(micro_codec());
    DiscriminatorPair discs(DiscriminatorConfig{1, 4});
    CodecTrainConfig tc;
    tc.accumulate = 2;
    tc.weights.gan_start_step = 5;
    CodecTrainer trainer(codec, discs, tc);
    torch::manual_seed(10);
    for (int i = 0; i < 10; ++i) trainer.step({random_clips(2), random_clips(2)});
    auto out = snapshot(codec.parameters());
    auto d = snapshot(discs.parameters());
    out.insert(out.end(), d.begin(), d.end());
    return out;
  };
  auto a = run(), b = run();
  for (size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(bit_equal(a[i], b[i]));
}

TEST(CodecTrainer, ResumeMatchesUninterruptedRun) {
  auto dir = tats::testing::temp_dir("trainer_resume");
  auto batches = [](int i) {
    torch::manual_seed(100 + i);
    return std::vector<torch::Tensor>{random_clips(2)};
  };
  CodecTrainConfig tc;
  tc.accumulate = 1;
  tc.weights.gan_start_step = 2;

  torch::manual_seed(11);
  VideoCodec straight(micro_codec());
  DiscriminatorPair straight_discs(DiscriminatorConfig{1, 4});
  CodecTrainer straight_trainer(straight, straight_discs, tc);
  for (int i = 0; i < 4; ++i) straight_trainer.step(batches(i));

  torch::manual_seed(11);
  VideoCodec first(micro_codec());
  DiscriminatorPair first_discs(DiscriminatorConfig{1, 4});
  CodecTrainer first_trainer(first, first_discs, tc);
  for (int i = 0; i < 2; ++i) first_trainer.step(batches(i));
  Checkpoint ckpt;
  first.save(ckpt);
  first_discs.save(ckpt);
  first_trainer.save(ckpt);
  save_checkpoint(dir / "t.ckpt", ckpt);

  auto loaded = load_checkpoint(dir / "t.ckpt");
  VideoCodec resumed(micro_codec());
  DiscriminatorPair resumed_discs(DiscriminatorConfig{1, 4});
  resumed.load(loaded);
  resumed_discs.load(loaded);
  CodecTrainer resumed_trainer(resumed, resumed_discs, tc);
  resumed_trainer.load(loaded);
  EXPECT_EQ(resumed_trainer.current_step(), 2);
  for (int i = 2; i < 4; ++i) resumed_trainer.step(batches(i));

  auto a = straight.parameters(), b = resumed.parameters();
  for (size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(torch::equal(a[i], b[i]));
  EXPECT_TRUE(torch::equal(straight.codebook().embeddings, resumed.codebook().embeddings));
}

TEST(CodecTrainer, NonFiniteInputNamesTheTerm) {
  VideoCodec codec(micro_codec());
  DiscriminatorPair discs(DiscriminatorConfig{1, 4});
  CodecTrainConfig tc;
  tc.accumulate = 1;
  tc.init_codebook_from_data = false;
  CodecTrainer trainer(codec, discs, tc);
  auto x = random_clips(2);
  x.view({-1})[5] = NAN;
  try {
    trainer.step({x});
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("L_"), std::string::npos) << e.what();
  }
}

TEST(Optim, ClipGradNormRescalesToBound) {
  auto p = torch::zeros({3}, torch::kFloat64).requires_grad_(true);
  p.mutable_grad() = torch::tensor({3.0, 4.0, 0.0}, torch::kFloat64);
  EXPECT_NEAR(grad_norm({p}), 5.0, 1e-12);
  EXPECT_NEAR(clip_grad_norm({p}, 1.0), 1.0, 1e-12);
  EXPECT_TRUE(torch::allclose(p.grad(), torch::tensor({0.6, 0.8, 0.0}, torch::kFloat64)));
  EXPECT_NEAR(clip_grad_norm({p}, 2.0), 1.0, 1e-12);
}

TEST(Optim, AdamFirstStepMovesByLearningRate) {
  auto p = torch::tensor({1.0, -1.0}, torch::kFloat64).requires_grad_(true);
  Adam opt({p}, AdamConfig{0.1, 0.5, 0.9, 1e-8, 0.0});
  p.mutable_grad() = torch::tensor({2.0, -0.5}, torch::kFloat64);
  opt.step();
  // Bias-corrected first step is lr * sign(g) up to eps.
  EXPECT_NEAR(p[0].item<double>(), 0.9, 1e-6);
  EXPECT_NEAR(p[1].item<double>(), -0.9, 1e-6);
}
