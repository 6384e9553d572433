#include "tats/attention.hpp"
#include "tats/checkpoint.hpp"
#include "tats/error.hpp"
#include "tats/generation.hpp"
#include "tats/prior_trainer.hpp"
#include "tats/sampler.hpp"
#include "tats/tokens.hpp"
#include "tats/transformer.hpp"
#include "tabular_prior.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

using namespace tats;
using tats::testing::bit_equal;
using tats::testing::MarkovPrior;
using tats::testing::RulePrior;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TransformerConfig small_config(int64_t vocab, int64_t layers = 2) {
  TransformerConfig c;
  c.n_layers = layers;
  c.n_heads = 2;
  c.embed_dim = 32;
  c.max_positions = 64;
  c.vocab = vocab;
  return c;
}

std::vector<std::vector<bool>> to_matrix(const AttentionLayout& l) {
  std::vector<std::vector<bool>> m(static_cast<size_t>(l.n_positions));
  for (int64_t q = 0; q < l.n_positions; ++q) {
    for (int64_t k = 0; k < l.n_positions; ++k) m[q].push_back(l.allows(q, k));
  }
  return m;
}

// Every (query, forbidden key) pair: perturbing the key's embedding must leave
// the query's logits bit-identical.
void expect_mask_sound(Transformer& model, const AttentionLayout& layout, int64_t vocab) {
  torch::NoGradGuard no_grad;
  model->eval();
  auto ids = torch::randint(0, vocab, {1, layout.n_positions}, torch::kInt64);
  auto emb = model->embed(ids);
  auto base = model->forward_embeddings(emb, layout);
  for (int64_t k = 0; k < layout.n_positions; ++k) {
    auto perturbed = emb.clone();
    perturbed[0][k] += torch::randn({emb.size(2)}) * 3.0;
    auto out = model->forward_embeddings(perturbed, layout);
    for (int64_t q = 0; q < layout.n_positions; ++q) {
      if (layout.allows(q, k) || q == k) continue;
      ASSERT_TRUE(torch::equal(out[0][q], base[0][q])) << "query " << q << " key " << k;
    }
  }
}

}  // namespace

TEST(Tokens, FlattenIsRowMajorFrameByFrame) {
  TokenGrid g{torch::tensor({0, 1, 2, 3}, torch::kInt64).reshape({2, 1, 2})};
  auto seq = flatten(g, 4);
  EXPECT_TRUE(torch::equal(seq.ids, torch::tensor({0, 1, 2, 3}, torch::kInt64)));
  EXPECT_EQ(seq.slice_len(), 2);
  auto g3 = TokenGrid{torch::arange(12, torch::kInt64).reshape({2, 2, 3})};
  EXPECT_TRUE(torch::equal(flatten(g3).ids, torch::arange(12, torch::kInt64)));
}

TEST(Tokens, UnflattenInvertsFlatten) {
  torch::manual_seed(1);
  for (int i = 0; i < 10; ++i) {
    TokenGrid g{torch::randint(0, 50, {1 + i % 3, 2, 3}, torch::kInt64)};
    EXPECT_TRUE(torch::equal(unflatten(flatten(g, 50)).indices, g.indices));
  }
  auto grids = torch::randint(0, 9, {3, 2, 2, 2}, torch::kInt64);
  EXPECT_TRUE(torch::equal(unflatten_batch(flatten_batch(grids), 2, 2), grids));
}

TEST(Tokens, UnflattenRejectsIndivisibleLength) {
  TokenSequence seq{torch::arange(5, torch::kInt64), 1, 2, 0, 5};
  EXPECT_THROW(unflatten(seq), std::invalid_argument);
}

TEST(Tokens, VocabLayout) {
  TokenVocab v{10, 3};
  EXPECT_EQ(v.condition_id(0), 10);
  EXPECT_EQ(v.condition_id(2), 12);
  EXPECT_EQ(v.sos_id(), 13);
  EXPECT_EQ(v.size(), 14);
  EXPECT_THROW(v.condition_id(3), std::out_of_range);
  EXPECT_THROW(v.condition_id(-1), std::out_of_range);
}

TEST(Tokens, VtokRoundTrip) {
  auto dir = tats::testing::temp_dir("vtok");
  auto ids = torch::randint(0, 300, {4, 12}, torch::kInt64);
  VtokMetadata meta{6, 305, 300, 4, Json{{"note", "x"}}};
  save_vtok(dir / "a.vtok", ids, meta);
  auto [back, m] = load_vtok(dir / "a.vtok");
  EXPECT_TRUE(torch::equal(back, ids));
  EXPECT_EQ(m.slice_len, 6);
  EXPECT_EQ(m.vocab, 305);
  EXPECT_EQ(m.codebook_size, 300);
  EXPECT_EQ(m.n_cond, 4);
  EXPECT_EQ(m.extra.at("note"), "x");
}

TEST(Layouts, CausalIsLowerTriangular) {
  auto l = causal_layout(3, 0);
  auto m = to_matrix(l);
  std::vector<std::vector<bool>> want{{true, false, false}, {true, true, false}, {true, true, true}};
  EXPECT_EQ(m, want);
  auto one = causal_layout(1, 0);
  EXPECT_TRUE(one.allows(0, 0));
  auto p = causal_layout(4, 1);
  EXPECT_EQ(p.loss_positions, (std::vector<int64_t>{1, 2, 3}));
  EXPECT_EQ(p.target_shift, 1);
  EXPECT_EQ(p.roles[0], PositionRole::kCondition);
  EXPECT_THROW(causal_layout(2, 3), std::invalid_argument);
}

TEST(Layouts, InterpolationEnumeratedFromRule) {
  // Order: a0 a1 | m0 m1 | b0 b1.
  auto l = interpolation_layout(2, 1);
  ASSERT_EQ(l.n_positions, 6);
  const int a0 = 0, a1 = 1, m0 = 2, m1 = 3, b0 = 4, b1 = 5;
  auto attends = [&](int q) {
    std::vector<int> keys;
    for (int k = 0; k < 6; ++k) {
      if (l.allows(q, k)) keys.push_back(k);
    }
    return keys;
  };
  EXPECT_EQ(attends(m0), (std::vector<int>{a0, a1, m0, b0, b1}));
  EXPECT_EQ(attends(m1), (std::vector<int>{a0, a1, m0, m1, b0, b1}));
  EXPECT_EQ(attends(b0), (std::vector<int>{a0, a1, b0, b1}));
  EXPECT_EQ(attends(a0), (std::vector<int>{a0, a1, b0, b1}));
  EXPECT_EQ(l.loss_positions, (std::vector<int64_t>{m0, m1}));
  EXPECT_EQ(l.target_shift, 0);
  EXPECT_EQ(l.dump(),
            "A 11..11\n"
            "A 11..11\n"
            "M 111.11\n"
            "M 111111\n"
            "B 11..11\n"
            "B 11..11\n");
}

TEST(Layouts, InterpolationWithPrefixAndLeakyVariant) {
  auto l = interpolation_layout(2, 2, 1);
  ASSERT_EQ(l.n_positions, 9);
  for (int64_t q = 1; q < 9; ++q) EXPECT_TRUE(l.allows(q, 0));
  EXPECT_FALSE(l.allows(0, 1));
  for (int64_t q = 7; q < 9; ++q) {
    for (int64_t k = 3; k < 7; ++k) EXPECT_FALSE(l.allows(q, k));
  }
  auto leak = leaky_interpolation_layout(2, 2, 1);
  for (int64_t q = 7; q < 9; ++q) {
    for (int64_t k = 3; k < 7; ++k) EXPECT_TRUE(leak.allows(q, k));
  }
  for (int64_t q = 0; q < 7; ++q) {
    for (int64_t k = 0; k < 9; ++k) EXPECT_EQ(leak.allows(q, k), l.allows(q, k));
  }
}

TEST(Transformer, OutputShapeAndLengthLimit) {
  torch::manual_seed(2);
  Transformer model(small_config(11));
  auto ids = torch::randint(0, 11, {2, 7}, torch::kInt64);
  auto out = model->forward(ids, causal_layout(7, 1));
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{2, 7, 11}));
  EXPECT_TRUE(torch::isfinite(out).all().item<bool>());
  auto long_ids = torch::zeros({1, 65}, torch::kInt64);
  EXPECT_THROW(model->forward(long_ids, causal_layout(65, 1)), std::length_error);
  EXPECT_THROW(model->forward(torch::full({1, 3}, 11, torch::kInt64), causal_layout(3, 1)), std::out_of_range);
}

TEST(Transformer, CausalMaskIsSoundBitwise) {
  torch::manual_seed(3);
  Transformer model(small_config(9, 3));
  expect_mask_sound(model, causal_layout(12, 1), 9);
}

TEST(Transformer, InterpolationMaskIsSoundBitwise) {
  torch::manual_seed(4);
  Transformer model(small_config(9, 3));
  expect_mask_sound(model, interpolation_layout(2, 2, 1), 9);
  expect_mask_sound(model, interpolation_layout(3, 1, 0), 9);
}

TEST(Transformer, LeakyLayoutLeaksMiddleIntoMiddleQueries) {
  torch::manual_seed(5);
  Transformer model(small_config(9, 2));
  model->eval();
  torch::NoGradGuard no_grad;
  auto layout = leaky_interpolation_layout(2, 1, 0);
  auto ids = torch::randint(0, 9, {1, 6}, torch::kInt64);
  auto emb = model->embed(ids);
  auto base = model->forward_embeddings(emb, layout);
  auto perturbed = emb.clone();
  perturbed[0][3] += 1.0;
  auto out = model->forward_embeddings(perturbed, layout);
  // m0 never attends m1 directly, but reaches it through the back anchor.
  EXPECT_FALSE(torch::equal(out[0][2], base[0][2]));
}

TEST(Transformer, ZeroLayerLogitsArePositionIndependent) {
  torch::manual_seed(6);
  Transformer model(small_config(7, 0));
  model->eval();
  auto ids = torch::tensor({{3, 1, 3, 5, 3}}, torch::kInt64);
  auto out = model->forward(ids, causal_layout(5, 0));
  EXPECT_TRUE(torch::equal(out[0][0], out[0][2]));
  EXPECT_TRUE(torch::equal(out[0][0], out[0][4]));
  EXPECT_FALSE(torch::equal(out[0][0], out[0][1]));
}

TEST(Transformer, CheckpointRoundTrip) {
  auto dir = tats::testing::temp_dir("prior_ckpt");
  torch::manual_seed(7);
  Transformer a(small_config(9));
  Checkpoint ckpt;
  a->save(ckpt);
  save_checkpoint(dir / "p.ckpt", ckpt);
  auto loaded = load_checkpoint(dir / "p.ckpt");
  Transformer b(transformer_config_from_json(loaded.metadata.at("prior.config")));
  b->load(loaded);
  auto ids = torch::randint(0, 9, {2, 6}, torch::kInt64);
  a->eval();
  b->eval();
  EXPECT_TRUE(torch::equal(a->forward(ids, causal_layout(6, 1)), b->forward(ids, causal_layout(6, 1))));
}

TEST(NllLoss, UniformLogitsGiveLnV) {
  auto logits = torch::zeros({2, 5, 13}, torch::kFloat64);
  auto targets = torch::randint(0, 13, {2, 5}, torch::kInt64);
  EXPECT_NEAR(nll_loss(logits, targets, {1, 2, 3, 4}, 1).item<double>(), std::log(13.0), 1e-12);
}

TEST(NllLoss, ConfidentCorrectLogitsGiveNearZero) {
  auto targets = torch::tensor({{0, 2, 1}}, torch::kInt64);
  auto logits = torch::zeros({1, 3, 3}, torch::kFloat64);
  logits[0][0][2] = 100;
  logits[0][1][1] = 100;
  EXPECT_LT(nll_loss(logits, targets, {1, 2}, 1).item<double>(), 1e-40);
}

TEST(NllLoss, HandComputedTwoPositionExample) {
  // Equal-position targets: position 0 logits (1, 2, 0) target 1; position 1
  // logits (0, 0, ln 3) target 2.
  auto logits = torch::tensor({{{1.0, 2.0, 0.0}, {0.0, 0.0, std::log(3.0)}}}, torch::kFloat64);
  auto targets = torch::tensor({{1, 2}}, torch::kInt64);
  const double l0 = -(2.0 - std::log(std::exp(1.0) + std::exp(2.0) + 1.0));
  const double l1 = -std::log(3.0 / 5.0);
  EXPECT_NEAR(nll_loss(logits, targets, {0, 1}, 0).item<double>(), 0.5 * (l0 + l1), 1e-12);
  EXPECT_THROW(nll_loss(logits, targets, std::vector<int64_t>{}, 0), std::invalid_argument);
}

TEST(Sampler, NucleusExample) {
  SamplerConfig c;
  c.top_p = 0.8;
  auto p = truncated_distribution({std::log(0.5), std::log(0.3), std::log(0.2)}, c);
  EXPECT_NEAR(p[0], 0.625, 1e-12);
  EXPECT_NEAR(p[1], 0.375, 1e-12);
  EXPECT_EQ(p[2], 0.0);
}

TEST(Sampler, TopKAndTies) {
  SamplerConfig c;
  c.top_k = 2;
  auto p = truncated_distribution({1.0, 3.0, 3.0, 3.0}, c);
  EXPECT_EQ(p[0], 0.0);
  EXPECT_NEAR(p[1], 0.5, 1e-12);
  EXPECT_NEAR(p[2], 0.5, 1e-12);
  EXPECT_EQ(p[3], 0.0);
  c.top_k = 10;
  auto all = truncated_distribution({0.0, 0.0}, c);
  EXPECT_NEAR(all[0], 0.5, 1e-12);
}

TEST(Sampler, LowTemperatureIsArgmax) {
  SamplerConfig c;
  c.temperature = 1e-4;
  auto p = truncated_distribution({0.1, 0.3, 0.2}, c);
  EXPECT_EQ(p[1], 1.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_next({0.1, 0.3, 0.2}, c, rng), 1);
}

TEST(Sampler, ErrorsOnInvalidInputAndConfig) {
  SamplerConfig c;
  EXPECT_THROW(truncated_distribution({-kInf, -kInf}, c), std::invalid_argument);
  EXPECT_THROW(truncated_distribution({std::nan(""), 0.0}, c), std::invalid_argument);
  c.temperature = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.temperature = 1;
  c.top_p = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.top_p = 1;
  c.top_k = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Sampler, EmpiricalFrequenciesWithinThreeSigma) {
  SamplerConfig c;
  c.temperature = 0.8;
  c.top_k = 4;
  c.top_p = 0.9;
  std::vector<double> logits{0.3, -1.0, 1.2, 0.0, 0.7, -0.2};
  auto p = truncated_distribution(logits, c);
  std::mt19937_64 rng(42);
  const int n = 100000;
  std::vector<int> counts(logits.size(), 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<size_t>(sample_next(logits, c, rng))];
  for (size_t i = 0; i < p.size(); ++i) {
    const double sigma = std::sqrt(n * p[i] * (1 - p[i]));
    EXPECT_LE(std::abs(counts[i] - n * p[i]), 3 * sigma + 1e-9) << "id " << i;
  }
}

TEST(Sampler, StreamsAreDeterministicAndDistinct) {
  auto a = make_rng_streams(9, 3), b = make_rng_streams(9, 3);
  EXPECT_EQ(a[1](), b[1]());
  EXPECT_NE(a[0](), a[2]());
  EXPECT_NE(make_rng_streams(10, 1)[0](), make_rng_streams(9, 1)[0]());
}

TEST(Generation, LengthContractAndCodebookOnly) {
  TokenShape shape{2, 2, TokenVocab{5, 2}};
  RulePrior uniform(shape.vocab.size(), [](const torch::Tensor&, const AttentionLayout&, int64_t) {
    return std::vector<double>(8, 0.0);
  });
  auto rngs = make_rng_streams(1, 3);
  auto out = generate(uniform, sos_prefix(shape.vocab, 3), 3, shape, SamplerConfig{}, rngs);
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{3, 3, 2, 2}));
  EXPECT_LT(out.max().item<int64_t>(), 5);
  EXPECT_GE(out.min().item<int64_t>(), 0);
}

TEST(Generation, VocabMismatchAndRngCountErrors) {
  TokenShape shape{1, 1, TokenVocab{5, 0}};
  RulePrior wrong(9, [](const torch::Tensor&, const AttentionLayout&, int64_t) { return std::vector<double>(9, 0.0); });
  auto rngs = make_rng_streams(1, 1);
  EXPECT_THROW(generate(wrong, sos_prefix(shape.vocab, 1), 2, shape, SamplerConfig{}, rngs), std::invalid_argument);
  RulePrior ok(6, [](const torch::Tensor&, const AttentionLayout&, int64_t) { return std::vector<double>(6, 0.0); });
  EXPECT_THROW(generate(ok, sos_prefix(shape.vocab, 2), 2, shape, SamplerConfig{}, rngs), std::invalid_argument);
}

TEST(Generation, LongWithTargetEqualTrainIsGenerate) {
  TokenShape shape{1, 2, TokenVocab{4, 0}};
  auto prior = MarkovPrior::random(4, 2, 0, 3);
  GenerationPlan plan;
  plan.train_slices = 3;
  plan.target_slices = 3;
  plan.prefix = sos_prefix(shape.vocab, 2);
  auto r1 = make_rng_streams(5, 2), r2 = make_rng_streams(5, 2);
  auto a = generate_long(prior, plan, shape, SamplerConfig{}, r1);
  auto b = generate(prior, plan.prefix, 3, shape, SamplerConfig{}, r2);
  EXPECT_TRUE(bit_equal(a, b));
}

TEST(Generation, WindowIsReindexedAndKeepsPrefix) {
  TokenShape shape{1, 1, TokenVocab{3, 2}};
  std::vector<int64_t> lengths;
  std::vector<int64_t> first_ids;
  RulePrior probe(shape.vocab.size(), [&](const torch::Tensor& row, const AttentionLayout& l, int64_t pos) {
    lengths.push_back(l.n_positions);
    first_ids.push_back(row[0].item<int64_t>());
    EXPECT_EQ(pos, l.n_positions - 1);
    EXPECT_EQ(tats::testing::count_prefix(l), 1);
    return std::vector<double>{0, 0, 0, -kInf, -kInf, -kInf};
  });
  GenerationPlan plan;
  plan.train_slices = 3;
  plan.target_slices = 7;
  plan.prefix = class_prefix(shape.vocab, {1});
  auto rngs = make_rng_streams(2, 1);
  auto out = generate_long(probe, plan, shape, SamplerConfig{}, rngs);
  EXPECT_EQ(out.size(1), 7);
  // 3 tokens from positions 1..3, then every window is [prefix | 2 slices].
  EXPECT_EQ(lengths, (std::vector<int64_t>{1, 2, 3, 3, 3, 3, 3}));
  for (auto id : first_ids) EXPECT_EQ(id, shape.vocab.condition_id(1));
}

TEST(Generation, PeriodicPriorGivesPeriodicOutput) {
  const int64_t period = 5;
  TokenShape shape{1, 1, TokenVocab{period, 0}};
  RulePrior cycle(shape.vocab.size(), [&](const torch::Tensor& row, const AttentionLayout&, int64_t pos) {
    std::vector<double> out(static_cast<size_t>(period + 1), -kInf);
    const int64_t last = row[pos].item<int64_t>();
    const int64_t next = last >= period ? 0 : (last + 1) % period;
    out[static_cast<size_t>(next)] = 20.0;
    for (int64_t v = 0; v < period; ++v) {
      if (v != next) out[static_cast<size_t>(v)] = 0.0;
    }
    return out;
  });
  GenerationPlan plan;
  plan.train_slices = 4;
  plan.target_slices = 80;
  plan.prefix = sos_prefix(shape.vocab, 1);
  SamplerConfig c;
  c.top_k = 1;
  auto rngs = make_rng_streams(3, 1);
  auto out = generate_long(cycle, plan, shape, c, rngs).reshape({-1});
  for (int64_t i = period; i < out.size(0); ++i) EXPECT_EQ(out[i].item<int64_t>(), out[i - period].item<int64_t>());
}

TEST(Generation, OrderOneChainBigramsWithinThreeSigma) {
  const int64_t k = 3;
  TokenShape shape{1, 1, TokenVocab{k, 0}};
  auto prior = MarkovPrior::random(k, 1, 0, 11);
  GenerationPlan plan;
  plan.train_slices = 2;
  plan.target_slices = 256;
  plan.prefix = sos_prefix(shape.vocab, 4);
  auto rngs = make_rng_streams(4, 4);
  auto out = generate_long(prior, plan, shape, SamplerConfig{}, rngs).reshape({4, -1});
  std::vector<std::vector<double>> counts(k, std::vector<double>(k, 0));
  for (int64_t b = 0; b < 4; ++b) {
    for (int64_t i = 1; i < out.size(1); ++i) counts[out[b][i - 1].item<int64_t>()][out[b][i].item<int64_t>()] += 1;
  }
  for (int64_t a = 0; a < k; ++a) {
    double row = 0;
    for (double v : counts[a]) row += v;
    auto p = prior.conditional({a});
    for (int64_t x = 0; x < k; ++x) {
      const double sigma = std::sqrt(row * p[x] * (1 - p[x]));
      EXPECT_LE(std::abs(counts[a][x] - row * p[x]), 3 * sigma + 1e-9) << a << "->" << x;
    }
  }
}

TEST(Generation, TabularPriorIsInsensitiveToWindowStart) {
  // The same window content at a different absolute start yields the same
  // draw when the prior ignores positions.
  TokenShape shape{1, 1, TokenVocab{4, 0}};
  auto prior = MarkovPrior::random(4, 2, 0, 12);
  GenerationPlan plan;
  plan.train_slices = 3;
  plan.target_slices = 40;
  plan.prefix = sos_prefix(shape.vocab, 1);
  auto r1 = make_rng_streams(8, 1);
  auto full = generate_long(prior, plan, shape, SamplerConfig{}, r1).reshape({-1});
  auto r2 = make_rng_streams(8, 1);
  auto again = generate_long(prior, plan, shape, SamplerConfig{}, r2).reshape({-1});
  EXPECT_TRUE(torch::equal(full, again));
  auto window = torch::cat({plan.prefix, full.narrow(0, 20, 2).unsqueeze(0)}, 1);
  auto probs = prior.predict(window, causal_layout(3, 1), 2);
  auto expect = prior.conditional({full[20].item<int64_t>(), full[21].item<int64_t>()});
  for (int64_t x = 0; x < 4; ++x) EXPECT_NEAR(std::exp(probs[0][x].item<double>()), expect[x], 1e-12);
}

TEST(Hierarchical, AnchorsInterleaveExactly) {
  TokenShape shape{2, 2, TokenVocab{6, 0}};
  RulePrior ar(shape.vocab.size(), [](const torch::Tensor&, const AttentionLayout&, int64_t) {
    return std::vector<double>{0.1, 0.5, -0.3, 0.2, 0.0, 0.4, -kInf};
  });
  RulePrior interp(shape.vocab.size(), [](const torch::Tensor&, const AttentionLayout&, int64_t) {
    return std::vector<double>{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -kInf};
  });
  GenerationPlan plan;
  plan.train_slices = 3;
  plan.target_slices = 12;
  plan.hierarchical = true;
  plan.anchor_interval = 4;
  plan.prefix = sos_prefix(shape.vocab, 3);
  auto rngs = make_rng_streams(6, 3);
  auto r = generate_hierarchical(plan, ar, interp, shape, SamplerConfig{}, SamplerConfig{}, rngs);
  EXPECT_EQ(r.tokens.sizes(), (std::vector<int64_t>{3, 12, 2, 2}));
  EXPECT_EQ(r.anchors.size(1), 4);
  for (int64_t i = 0; i < 3; ++i) EXPECT_TRUE(torch::equal(r.tokens.select(1, 4 * i), r.anchors.select(1, i)));
}

TEST(Hierarchical, IntervalOneIsGenerateLong) {
  TokenShape shape{1, 1, TokenVocab{4, 0}};
  auto ar = MarkovPrior::random(4, 1, 0, 13);
  RulePrior unused(5, [](const torch::Tensor&, const AttentionLayout&, int64_t) -> std::vector<double> {
    ADD_FAILURE() << "interpolation prior should not be called";
    return std::vector<double>(5, 0.0);
  });
  GenerationPlan plan;
  plan.train_slices = 2;
  plan.target_slices = 9;
  plan.anchor_interval = 1;
  plan.prefix = sos_prefix(shape.vocab, 2);
  auto r1 = make_rng_streams(7, 2), r2 = make_rng_streams(7, 2);
  auto h = generate_hierarchical(plan, ar, unused, shape, SamplerConfig{}, SamplerConfig{}, r1);
  auto l = generate_long(ar, plan, shape, SamplerConfig{}, r2);
  EXPECT_TRUE(bit_equal(h.tokens, l));
}

TEST(Hierarchical, RejectsTargetNotMultipleOfInterval) {
  TokenShape shape{1, 1, TokenVocab{4, 0}};
  auto ar = MarkovPrior::random(4, 1, 0, 14);
  GenerationPlan plan;
  plan.train_slices = 2;
  plan.target_slices = 10;
  plan.hierarchical = true;
  plan.anchor_interval = 4;
  plan.prefix = sos_prefix(shape.vocab, 1);
  auto rngs = make_rng_streams(1, 1);
  EXPECT_THROW(generate_hierarchical(plan, ar, ar, shape, SamplerConfig{}, SamplerConfig{}, rngs), ConfigError);
}

TEST(Hierarchical, FillMiddlesSeesBothAnchorsButNoFutureMiddle) {
  TokenShape shape{1, 2, TokenVocab{5, 0}};
  RulePrior probe(shape.vocab.size(), [&](const torch::Tensor& row, const AttentionLayout& l, int64_t pos) {
    EXPECT_EQ(l.roles[static_cast<size_t>(pos)], PositionRole::kMiddle);
    // Positions after the query inside the middle block still hold SOS.
    for (int64_t k = pos + 1; k < l.n_positions; ++k) {
      if (l.roles[static_cast<size_t>(k)] == PositionRole::kMiddle) EXPECT_EQ(row[k].item<int64_t>(), 5);
    }
    // Copy the back anchor token at the same in-slice offset.
    const int64_t back_start = l.n_positions - 2;
    const int64_t offset = (pos - 3) % 2;
    std::vector<double> out(6, -kInf);
    out[static_cast<size_t>(row[back_start + offset].item<int64_t>())] = 0.0;
    return out;
  });
  auto front = torch::tensor({{{0, 1}}}, torch::kInt64);
  auto back = torch::tensor({{{3, 4}}}, torch::kInt64);
  auto rngs = make_rng_streams(1, 1);
  auto mid = fill_middles(probe, sos_prefix(shape.vocab, 1), front, back, 2, shape, SamplerConfig{}, rngs);
  EXPECT_TRUE(torch::equal(mid, torch::tensor({{{{3, 4}}, {{3, 4}}}}, torch::kInt64)));
}

TEST(PriorBatches, CausalAndInterpolationArrangement) {
  TokenVocab v{10, 0};
  auto grids = torch::tensor({{{{1, 2}}, {{3, 4}}, {{5, 6}}}}, torch::kInt64);
  auto c = causal_batch(grids, sos_prefix(v, 1));
  EXPECT_TRUE(torch::equal(c.ids, torch::tensor({{10, 1, 2, 3, 4, 5, 6}}, torch::kInt64)));
  EXPECT_EQ(c.layout.loss_positions.front(), 1);
  auto i = interpolation_batch(grids, sos_prefix(v, 1), v);
  EXPECT_TRUE(torch::equal(i.ids, torch::tensor({{10, 1, 2, 10, 3, 5, 6}}, torch::kInt64)));
  EXPECT_TRUE(torch::equal(i.targets.narrow(1, 3, 2), torch::tensor({{3, 4}}, torch::kInt64)));
  EXPECT_EQ(i.layout.loss_positions, (std::vector<int64_t>{3, 4}));
  auto sparse = sparse_slices(torch::arange(10, torch::kInt64).reshape({1, 10, 1, 1}), 4);
  EXPECT_TRUE(torch::equal(sparse.reshape({-1}), torch::tensor({0, 4, 8}, torch::kInt64)));
}

TEST(PriorTraining, OverfitSingleSequenceIsReproduced) {
  torch::manual_seed(20);
  TokenVocab v{6, 0};
  TokenShape shape{1, 2, v};
  auto grid = torch::tensor({{{{2, 5}}, {{0, 3}}, {{1, 1}}, {{4, 0}}}}, torch::kInt64);
  PriorTrainConfig tc;
  tc.optim.lr = 3e-3;
  tc.optim.weight_decay = 0;
  PriorTrainer trainer(Transformer(small_config(v.size())), tc);
  auto batch = causal_batch(grid.expand({4, 4, 1, 2}).contiguous(), sos_prefix(v, 4));
  double loss = 0;
  for (int i = 0; i < 150; ++i) loss = trainer.step(batch);
  EXPECT_LT(loss, 0.05);
  TransformerPredictor predictor(trainer.model());
  SamplerConfig greedy;
  greedy.top_k = 1;
  auto rngs = make_rng_streams(0, 1);
  auto out = generate(predictor, sos_prefix(v, 1), 4, shape, greedy, rngs);
  EXPECT_TRUE(torch::equal(out, grid));
}

TEST(PriorTraining, InterpolationPriorLearnsToCopyFrontAnchor) {
  torch::manual_seed(21);
  TokenVocab v{5, 0};
  TokenShape shape{1, 2, v};
  PriorTrainConfig tc;
  tc.optim.lr = 3e-3;
  tc.optim.weight_decay = 0;
  PriorTrainer trainer(Transformer(small_config(v.size())), tc);
  auto make = [&](int64_t b) {
    auto front = torch::randint(0, 5, {b, 1, 1, 2}, torch::kInt64);
    auto back = torch::randint(0, 5, {b, 1, 1, 2}, torch::kInt64);
    return interpolation_batch(torch::cat({front, front, front, back}, 1), sos_prefix(v, b), v);
  };
  for (int i = 0; i < 300; ++i) trainer.step(make(32));
  EXPECT_LT(trainer.evaluate(make(64)), 0.05);

  TransformerPredictor interp(trainer.model());
  auto ar = MarkovPrior::random(5, 1, 0, 22);
  GenerationPlan plan;
  plan.train_slices = 2;
  plan.target_slices = 9;
  plan.hierarchical = true;
  plan.anchor_interval = 3;
  plan.prefix = sos_prefix(v, 4);
  SamplerConfig greedy;
  greedy.top_k = 1;
  auto rngs = make_rng_streams(3, 4);
  auto r = generate_hierarchical(plan, ar, interp, shape, SamplerConfig{}, greedy, rngs);
  for (int64_t a = 0; a < 3; ++a) {
    for (int64_t j = 1; j < 3; ++j) {
      EXPECT_TRUE(torch::equal(r.tokens.select(1, 3 * a + j), r.anchors.select(1, a))) << "gap " << a << " middle " << j;
    }
  }
}

TEST(PriorTraining, ClassPrefixChangesSampledDistribution) {
  torch::manual_seed(23);
  TokenVocab v{4, 2};
  TokenShape shape{1, 2, v};
  PriorTrainConfig tc;
  tc.optim.lr = 3e-3;
  PriorTrainer trainer(Transformer(small_config(v.size())), tc);
  // Class 0 uses ids {0, 1}, class 1 uses {2, 3}.
  auto make = [&](int64_t b) {
    auto cls = torch::randint(0, 2, {b}, torch::kInt64);
    auto grids = torch::randint(0, 2, {b, 3, 1, 2}, torch::kInt64) + 2 * cls.view({b, 1, 1, 1});
    std::vector<int64_t> c(cls.data_ptr<int64_t>(), cls.data_ptr<int64_t>() + b);
    return causal_batch(grids, class_prefix(v, c));
  };
  for (int i = 0; i < 200; ++i) trainer.step(make(32));
  TransformerPredictor predictor(trainer.model());
  auto rngs = make_rng_streams(4, 32);
  auto g0 = generate(predictor, class_prefix(v, std::vector<int64_t>(32, 0)), 3, shape, SamplerConfig{}, rngs);
  auto g1 = generate(predictor, class_prefix(v, std::vector<int64_t>(32, 1)), 3, shape, SamplerConfig{}, rngs);
  // Chi-square test of homogeneity on the two id histograms.
  auto h0 = torch::bincount(g0.reshape({-1}), {}, 4).to(torch::kFloat64);
  auto h1 = torch::bincount(g1.reshape({-1}), {}, 4).to(torch::kFloat64);
  auto total = h0 + h1;
  const double n = h0.sum().item<double>();
  double chi2 = 0;
  for (int64_t i = 0; i < 4; ++i) {
    const double e = total[i].item<double>() / 2;
    if (e > 0) chi2 += std::pow(h0[i].item<double>() - e, 2) / e + std::pow(h1[i].item<double>() - e, 2) / e;
  }
  EXPECT_EQ(n, 192);
  EXPECT_GT(chi2, 16.27);  // chi-square(3) at p = 0.001
}

TEST(PriorTraining, NonFiniteLossRaisesDivergence) {
  TokenVocab v{4, 0};
  PriorTrainer trainer(Transformer(small_config(v.size())), PriorTrainConfig{});
  for (auto& p : trainer.model()->parameters()) {
    torch::NoGradGuard g;
    p.fill_(std::nan(""));
  }
  auto batch = causal_batch(torch::zeros({1, 2, 1, 1}, torch::kInt64), sos_prefix(v, 1));
  EXPECT_THROW(trainer.step(batch), DivergenceError);
}

TEST(PriorKinds, ParseAndPrint) {
  EXPECT_EQ(parse_prior_kind("ar"), PriorKind::kAr);
  EXPECT_EQ(to_string(parse_prior_kind("interp")), "interp");
  EXPECT_THROW(parse_prior_kind("bogus"), ConfigError);
}
