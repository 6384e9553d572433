#include "tats/checkpoint.hpp"
#include "tats/codec.hpp"
#include "tats/codec_trainer.hpp"
#include "tats/quantizer.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace tats;

namespace {

Codebook two_codes() {
  auto cb = Codebook::random(2, 2);
  cb.embeddings = torch::tensor({{0.0, 0.0}, {2.0, 2.0}}, torch::kFloat64);
  cb.ema_embed_sum = cb.embeddings.clone();
  cb.ema_cluster_size = torch::ones({2}, torch::kFloat64);
  return cb;
}

CodecConfig tiny_config(PaddingMode mode) {
  CodecConfig c;
  c.temporal_rate = 4;
  c.spatial_rate = 4;
  c.base_channels = 8;
  c.n_layers = 3;
  c.embed_dim = 8;
  c.codebook_size = 32;
  c.padding.mode = mode;
  return c;
}

// Brute-force nearest code: full scan with explicit loops.
int64_t brute_nearest(const torch::Tensor& f, const torch::Tensor& e) {
  auto fa = f.accessor<double, 1>();
  auto ea = e.accessor<double, 2>();
  int64_t best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int64_t k = 0; k < e.size(0); ++k) {
    double d = 0;
    for (int64_t j = 0; j < e.size(1); ++j) d += (fa[j] - ea[k][j]) * (fa[j] - ea[k][j]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST(Quantize, NearestCodeAndCommitLoss) {
  auto cb = two_codes();
  auto r = quantize(torch::tensor({{0.4, 0.4}}, torch::kFloat64), cb);
  EXPECT_EQ(r.tokens[0].item<int64_t>(), 0);
  EXPECT_NEAR(r.commit_loss.item<double>(), 0.32, 1e-12);
  EXPECT_NEAR(r.codebook_loss.item<double>(), 0.32, 1e-12);
}

TEST(Quantize, FixedPointHasZeroLoss) {
  auto r = quantize(torch::tensor({{2.0, 2.0}}, torch::kFloat64), two_codes());
  EXPECT_EQ(r.tokens[0].item<int64_t>(), 1);
  EXPECT_EQ(r.commit_loss.item<double>(), 0.0);
  EXPECT_EQ(r.codebook_loss.item<double>(), 0.0);
}

TEST(Quantize, TieGoesToLowestIndex) {
  auto r = quantize(torch::tensor({{1.0, 1.0}}, torch::kFloat64), two_codes());
  EXPECT_EQ(r.tokens[0].item<int64_t>(), 0);
  auto dup = torch::tensor({{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}}, torch::kFloat64);
  EXPECT_EQ(nearest_codes(torch::tensor({{1.0, 0.0}}, torch::kFloat64), dup)[0].item<int64_t>(), 0);
}

TEST(Quantize, MatchesBruteForceScan) {
  torch::manual_seed(3);
  for (int64_t k : {2, 17, 256, 1024}) {
    auto e = torch::randn({k, 6}, torch::kFloat64);
    auto f = torch::randn({50, 6}, torch::kFloat64);
    auto idx = nearest_codes(f, e);
    for (int64_t i = 0; i < 50; ++i) EXPECT_EQ(idx[i].item<int64_t>(), brute_nearest(f[i], e)) << "K=" << k;
  }
}

TEST(Quantize, LookupConsistencyAndStraightThrough) {
  torch::manual_seed(4);
  auto cb = Codebook::random(16, 4);
  cb.embeddings = cb.embeddings.to(torch::kFloat64);
  auto f = torch::randn({2, 3, 4}, torch::kFloat64).requires_grad_(true);
  auto r = quantize(f, cb);
  auto lookup = cb.embeddings.index_select(0, r.tokens.reshape({-1})).reshape({2, 3, 4});
  EXPECT_TRUE(torch::equal(r.quantized, lookup));
  EXPECT_TRUE(torch::equal(r.straight_through.detach(), lookup));
  auto w = torch::randn({2, 3, 4}, torch::kFloat64);
  (r.straight_through * w).sum().backward();
  EXPECT_TRUE(torch::equal(f.grad(), w));
}

TEST(Quantize, RejectsBadInput) {
  auto cb = two_codes();
  EXPECT_THROW(quantize(torch::tensor({{std::nan(""), 0.0}}, torch::kFloat64), cb), std::invalid_argument);
  EXPECT_THROW(quantize(torch::zeros({1, 3}, torch::kFloat64), cb), std::invalid_argument);
}

TEST(CodebookEma, ConvergesToRepeatedFeature) {
  auto cb = two_codes();
  auto v = torch::tensor({{0.3, -0.2}}, torch::kFloat64).expand({8, 2}).contiguous();
  auto assign = torch::zeros({8}, torch::kInt64);
  double prev = 1e9;
  for (int i = 0; i < 2000; ++i) {
    codebook_ema_update(cb, v, assign);
    const double err = (cb.embeddings[0] - v[0]).abs().max().item<double>();
    EXPECT_LE(err, std::max(prev, 1e-6));
    prev = err;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(CodebookEma, UnassignedCodeDriftsBelowBound) {
  auto cb = two_codes();
  auto v = torch::tensor({{0.1, 0.1}}, torch::kFloat64).expand({4, 2}).contiguous();
  auto assign = torch::zeros({4}, torch::kInt64);
  for (int i = 0; i < 100; ++i) {
    auto before = cb.embeddings[1].clone();
    codebook_ema_update(cb, v, assign);
    EXPECT_LT((cb.embeddings[1] - before).abs().max().item<double>(), 1e-6) << "step " << i;
  }
}

TEST(CodebookEma, TwoClustersReachClusterMeans) {
  torch::manual_seed(5);
  auto a = torch::randn({40, 3}, torch::kFloat64) * 0.1 + 2.0;
  auto b = torch::randn({60, 3}, torch::kFloat64) * 0.1 - 2.0;
  auto feats = torch::cat({a, b});
  auto cb = Codebook::random(2, 3);
  cb.embeddings = torch::tensor({{1.0, 1.0, 1.0}, {-1.0, -1.0, -1.0}}, torch::kFloat64);
  cb.ema_embed_sum = cb.embeddings.clone();
  cb.ema_cluster_size = torch::ones({2}, torch::kFloat64);
  for (int i = 0; i < 500; ++i) codebook_ema_update(cb, feats, nearest_codes(feats, cb.embeddings));
  // Oracle: k-means fixed point on the same data, by explicit averaging.
  auto assign = nearest_codes(feats, cb.embeddings);
  for (int64_t k = 0; k < 2; ++k) {
    auto mask = assign.eq(k);
    auto mean = feats.index({mask}).mean(0);
    EXPECT_LT((cb.embeddings[k] - mean).abs().max().item<double>(), 1e-3);
  }
}

TEST(CodebookEma, RejectsMismatchedBatch) {
  auto cb = two_codes();
  EXPECT_THROW(codebook_ema_update(cb, torch::zeros({3, 2}, torch::kFloat64), torch::zeros({2}, torch::kInt64)),
               std::invalid_argument);
}

TEST(Codec, OutputShapes) {
  for (auto [dt, ds] : {std::pair<int64_t, int64_t>{4, 4}, {2, 4}, {4, 8}, {1, 2}}) {
    auto cfg = tiny_config(PaddingMode::kReplicate);
    cfg.temporal_rate = dt;
    cfg.spatial_rate = ds;
    VideoCodec codec(cfg);
    codec.train(false);
    auto x = torch::rand({2, 1, 8, 16, 16}) * 2 - 1;
    auto z = codec.encode(x);
    EXPECT_EQ(z.sizes(), (std::vector<int64_t>{2, 8 / dt, 16 / ds, 16 / ds, cfg.embed_dim}));
    auto y = codec.decode(codec.quantize(z).quantized);
    EXPECT_EQ(y.sizes(), x.sizes());
    EXPECT_LE(y.abs().max().item<float>(), 1.0f);
  }
}

TEST(Codec, RejectsBadShapes) {
  VideoCodec codec(tiny_config(PaddingMode::kReplicate));
  EXPECT_THROW(codec.encode(torch::zeros({1, 1, 6, 16, 16})), std::invalid_argument);
  EXPECT_THROW(codec.encode(torch::zeros({1, 1, 8, 15, 16})), std::invalid_argument);
  EXPECT_THROW(codec.encode(torch::zeros({1, 2, 8, 16, 16})), std::invalid_argument);
}

TEST(Codec, ConstantClipReplicateGivesIdenticalSlices) {
  torch::manual_seed(6);
  VideoCodec codec(tiny_config(PaddingMode::kReplicate));
  codec.train(false);
  auto frame = torch::rand({1, 1, 1, 16, 16}) * 2 - 1;
  auto x = frame.expand({1, 1, 16, 16, 16}).contiguous();
  torch::NoGradGuard no_grad;
  auto z = codec.encode(x).squeeze(0);
  for (int64_t i = 1; i < z.size(0); ++i) EXPECT_TRUE(torch::allclose(z[i], z[0], 0, 1e-6));
  auto clip = VideoClip::from_channels_first(frame.expand({1, 1, 20, 16, 16}).squeeze(0).contiguous());
  EXPECT_EQ(equivariance_score(codec, clip, 16, 4), 1.0);
}

TEST(Codec, ConstantClipZeroPaddingMarksBoundaries) {
  torch::manual_seed(6);
  VideoCodec codec(tiny_config(PaddingMode::kZero));
  codec.train(false);
  auto x = (torch::rand({1, 1, 1, 16, 16}) * 2 - 1).expand({1, 1, 16, 16, 16}).contiguous();
  torch::NoGradGuard no_grad;
  auto z = codec.encode(x).squeeze(0);
  EXPECT_GT((z[0] - z[1]).abs().max().item<float>(), 1e-4f);
  EXPECT_GT((z[3] - z[2]).abs().max().item<float>(), 1e-4f);
}

TEST(Codec, RealFrameContextIsExactlyTimeAgnostic) {
  torch::manual_seed(7);
  auto cfg = tiny_config(PaddingMode::kRealFrame);
  cfg.padding.real_frames_per_side = 16;
  VideoCodec codec(cfg);
  codec.train(false);
  const int64_t ctx = codec.real_frames_required();
  ASSERT_GT(ctx, 0);
  auto clip = VideoClip((torch::rand({20 + 2 * ctx, 16, 16, 1}) * 2 - 1));
  EXPECT_EQ(equivariance_score(codec, clip, 16, 4), 1.0);
  auto x = torch::rand({1, 1, 16, 16, 16}) * 2 - 1;
  EXPECT_THROW(codec.encode(x), std::invalid_argument);
  TemporalContext short_ctx{torch::zeros({1, 1, ctx - 1, 16, 16}), torch::zeros({1, 1, ctx - 1, 16, 16})};
  EXPECT_THROW(codec.encode(x, short_ctx), std::invalid_argument);
}

TEST(Codec, EquivarianceNeedsLongEnoughClip) {
  VideoCodec codec(tiny_config(PaddingMode::kReplicate));
  EXPECT_THROW(equivariance_score(codec, VideoClip(torch::zeros({19, 16, 16, 1})), 16, 4), std::invalid_argument);
}

TEST(Codec, CheckpointRoundTripPreservesTokens) {
  torch::manual_seed(8);
  auto dir = tats::testing::temp_dir("codec_ckpt");
  VideoCodec codec(tiny_config(PaddingMode::kZero));
  auto x = torch::rand({2, 1, 8, 16, 16}) * 2 - 1;
  Checkpoint ckpt;
  codec.save(ckpt);
  save_checkpoint(dir / "c.ckpt", ckpt);
  auto loaded = load_checkpoint(dir / "c.ckpt");
  VideoCodec other(codec_config_from_json(loaded.metadata.at("codec_config")));
  other.load(loaded);
  EXPECT_TRUE(torch::equal(codec.tokenize(x), other.tokenize(x)));
  EXPECT_EQ(other.config().padding.mode, PaddingMode::kZero);
}

TEST(Codec, OverfitsOneVideo) {
  torch::manual_seed(9);
  auto cfg = tiny_config(PaddingMode::kReplicate);
  cfg.spatial_rate = 2;
  cfg.temporal_rate = 2;
  cfg.n_layers = 2;
  cfg.base_channels = 16;
  cfg.codebook_size = 64;
  VideoCodec codec(cfg);
  DiscriminatorPair discs(DiscriminatorConfig{1, 4});
  CodecTrainConfig tc;
  tc.accumulate = 1;
  tc.weights.lambda_match = 0;
  tc.weights.gan_start_step = 1 << 30;
  tc.gen_optim.lr = 3e-3;
  CodecTrainer trainer(codec, discs, tc);
  auto data = make_bouncing_blob_dataset(1, 8, {8, 8}, 1, 1);
  auto x = stack_channels_first({data[0].clip});
  for (int i = 0; i < 400; ++i) trainer.step({x});
  codec.train(false);
  torch::NoGradGuard no_grad;
  auto y = codec.detokenize(codec.tokenize(x));
  EXPECT_LE((y - x).abs().mean().item<double>(), 0.05);
}
