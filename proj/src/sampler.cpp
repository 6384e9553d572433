#include "tats/sampler.hpp"

#include "tats/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tats {

void SamplerConfig::validate() const {
  if (!(temperature > 0) || !std::isfinite(temperature)) throw ConfigError("sampler.temperature must be > 0");
  if (top_k < 0) throw ConfigError("sampler.top_k must be >= 1, or 0 for no limit");
  if (!(top_p > 0 && top_p <= 1)) throw ConfigError("sampler.top_p must be in (0, 1]");
}

Json to_json(const SamplerConfig& c) {
  return Json{{"temperature", c.temperature}, {"top_k", c.top_k}, {"top_p", c.top_p}, {"seed", c.seed}};
}

SamplerConfig sampler_config_from_json(const Json& j, const SamplerConfig& defaults) {
  SamplerConfig c = defaults;
  StrictReader r(j, "sampler");
  r.read("temperature", c.temperature).read("top_k", c.top_k).read("top_p", c.top_p).read("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

std::vector<double> truncated_distribution(const std::vector<double>& logits, const SamplerConfig& config) {
  config.validate();
  const size_t v = logits.size();
  std::vector<size_t> order(v);
  std::iota(order.begin(), order.end(), 0);
  double max_logit = -INFINITY;
  for (double l : logits) {
    if (std::isnan(l) || l == INFINITY) throw std::invalid_argument("sampler received a non-finite logit");
    max_logit = std::max(max_logit, l);
  }
  if (v == 0 || max_logit == -INFINITY) throw std::invalid_argument("all logits are -inf");

  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return logits[a] > logits[b]; });
  size_t keep = v;
  if (config.top_k > 0) keep = std::min(keep, static_cast<size_t>(config.top_k));

  std::vector<double> p(keep);
  double z = 0;
  for (size_t i = 0; i < keep; ++i) {
    p[i] = std::exp((logits[order[i]] - max_logit) / config.temperature);
    z += p[i];
  }
  // Small slack so that masses like 0.5 + 0.3 still count as reaching 0.8.
  constexpr double kSlack = 1e-9;
  size_t nucleus = keep;
  double cum = 0;
  for (size_t i = 0; i < keep; ++i) {
    p[i] /= z;
    cum += p[i];
    if (nucleus == keep && cum >= config.top_p - kSlack) nucleus = i + 1;
  }
  double mass = 0;
  for (size_t i = 0; i < nucleus; ++i) mass += p[i];
  std::vector<double> out(v, 0.0);
  for (size_t i = 0; i < nucleus; ++i) out[order[i]] = p[i] / mass;
  return out;
}

int64_t sample_categorical(const std::vector<double>& probs, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double cum = 0;
  int64_t last = -1;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0) continue;
    cum += probs[i];
    last = static_cast<int64_t>(i);
    if (u < cum) return last;
  }
  if (last < 0) throw std::invalid_argument("empty categorical distribution");
  return last;
}

int64_t sample_next(const std::vector<double>& logits, const SamplerConfig& config, std::mt19937_64& rng) {
  return sample_categorical(truncated_distribution(logits, config), rng);
}

std::vector<std::mt19937_64> make_rng_streams(uint64_t seed, int64_t n) {
  std::vector<std::mt19937_64> streams;
  streams.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(i),
                      static_cast<uint32_t>(static_cast<uint64_t>(i) >> 32)};
    streams.emplace_back(seq);
  }
  return streams;
}

}  // namespace tats
