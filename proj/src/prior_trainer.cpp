#include "tats/prior_trainer.hpp"

#include "tats/error.hpp"

#include <cmath>
#include <stdexcept>

namespace tats {

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::kAr:
      return "ar";
    case PriorKind::kArSparse:
      return "ar_sparse";
    case PriorKind::kInterp:
      return "interp";
  }
  return "ar";
}

PriorKind parse_prior_kind(const std::string& name) {
  if (name == "ar") return PriorKind::kAr;
  if (name == "ar_sparse") return PriorKind::kArSparse;
  if (name == "interp") return PriorKind::kInterp;
  throw ConfigError("unknown prior kind '" + name + "' (expected ar, ar_sparse or interp)");
}

void PriorTrainConfig::validate() const {
  if (steps < 0) throw ConfigError("prior training steps must be >= 0");
  if (batch_size < 1) throw ConfigError("prior batch_size must be >= 1");
  if (!(optim.lr > 0)) throw ConfigError("prior lr must be > 0");
  if (!(clip_norm > 0)) throw ConfigError("prior clip_norm must be > 0");
}

Json to_json(const PriorTrainConfig& c) {
  return Json{{"steps", c.steps},
              {"batch_size", c.batch_size},
              {"lr", c.optim.lr},
              {"beta1", c.optim.beta1},
              {"beta2", c.optim.beta2},
              {"weight_decay", c.optim.weight_decay},
              {"clip_norm", c.clip_norm},
              {"seed", c.seed}};
}

PriorTrainConfig prior_train_config_from_json(const Json& j) {
  PriorTrainConfig c;
  StrictReader r(j, "prior_training");
  r.read("steps", c.steps)
      .read("batch_size", c.batch_size)
      .read("lr", c.optim.lr)
      .read("beta1", c.optim.beta1)
      .read("beta2", c.optim.beta2)
      .read("weight_decay", c.optim.weight_decay)
      .read("clip_norm", c.clip_norm)
      .read("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

PriorBatch causal_batch(const torch::Tensor& grids, const torch::Tensor& prefix) {
  if (grids.dim() != 4 || prefix.dim() != 2 || prefix.size(0) != grids.size(0)) {
    throw std::invalid_argument("causal_batch expects B x t x h x w grids and a B x P prefix");
  }
  PriorBatch batch;
  batch.ids = torch::cat({prefix.to(torch::kInt64), flatten_batch(grids)}, 1);
  batch.targets = batch.ids;
  batch.layout = causal_layout(batch.ids.size(1), prefix.size(1));
  return batch;
}

PriorBatch interpolation_batch(const torch::Tensor& grids, const torch::Tensor& prefix, const TokenVocab& vocab) {
  if (grids.dim() != 4 || grids.size(1) < 3 || prefix.dim() != 2 || prefix.size(0) != grids.size(0)) {
    throw std::invalid_argument("interpolation_batch expects B x (M + 2) x h x w grids and a B x P prefix");
  }
  const int64_t b = grids.size(0);
  const int64_t n_middle = grids.size(1) - 2;
  const int64_t s = grids.size(2) * grids.size(3);
  auto flat = flatten_batch(grids);
  auto front = flat.narrow(1, 0, s);
  auto middle = flat.narrow(1, s, n_middle * s);
  auto back = flat.narrow(1, (n_middle + 1) * s, s);
  auto shifted = torch::cat({torch::full({b, 1}, vocab.sos_id(), torch::kInt64), middle.narrow(1, 0, middle.size(1) - 1)}, 1);
  auto pre = prefix.to(torch::kInt64);
  PriorBatch batch;
  batch.ids = torch::cat({pre, front, shifted, back}, 1);
  batch.targets = torch::cat({pre, front, middle, back}, 1);
  batch.layout = interpolation_layout(s, n_middle, prefix.size(1));
  return batch;
}

torch::Tensor sparse_slices(const torch::Tensor& grids, int64_t stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  auto idx = torch::arange(0, grids.size(1), stride, torch::kInt64);
  return grids.index_select(1, idx);
}

PriorBatch sample_prior_batch(PriorKind kind, const TokenCorpus& corpus, int64_t window, int64_t batch,
                              const TokenVocab& vocab, bool conditional, std::mt19937_64& rng) {
  const int64_t n = corpus.grids.size(0);
  const int64_t t = corpus.grids.size(1);
  if (n < 1 || window > t) throw std::invalid_argument("token corpus too short for the training window");
  if (conditional && static_cast<int64_t>(corpus.labels.size()) != n) {
    throw std::invalid_argument("conditional training needs one label per corpus entry");
  }
  std::uniform_int_distribution<int64_t> pick(0, n - 1);
  std::uniform_int_distribution<int64_t> offset(0, t - window);
  std::vector<torch::Tensor> rows;
  std::vector<int64_t> prefix_ids;
  for (int64_t i = 0; i < batch; ++i) {
    const int64_t r = pick(rng);
    const int64_t o = offset(rng);
    rows.push_back(corpus.grids[r].narrow(0, o, window));
    prefix_ids.push_back(conditional ? vocab.condition_id(corpus.labels[static_cast<size_t>(r)]) : vocab.sos_id());
  }
  auto grids = torch::stack(rows).to(torch::kInt64);
  auto prefix = torch::tensor(prefix_ids, torch::kInt64).unsqueeze(1);
  if (kind == PriorKind::kInterp) return interpolation_batch(grids, prefix, vocab);
  return causal_batch(grids, prefix);
}

PriorTrainer::PriorTrainer(Transformer model, const PriorTrainConfig& config)
    : model_(std::move(model)), config_(config), opt_(model_->parameters(), config.optim) {
  config_.validate();
}

double PriorTrainer::step(const PriorBatch& batch) {
  model_->train();
  opt_.zero_grad();
  auto loss = nll_loss(model_->forward(batch.ids, batch.layout), batch.targets, batch.layout);
  const double value = loss.item<double>();
  if (!std::isfinite(value)) throw DivergenceError("prior nll is non-finite at step " + std::to_string(step_));
  loss.backward();
  clip_grad_norm(opt_.params(), config_.clip_norm);
  opt_.step();
  ++step_;
  return value;
}

double PriorTrainer::evaluate(const PriorBatch& batch) {
  torch::NoGradGuard no_grad;
  model_->eval();
  return nll_loss(model_->forward(batch.ids, batch.layout), batch.targets, batch.layout).item<double>();
}

}  // namespace tats
