#pragma once

#include "tats/json_util.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace tats {

struct SamplerConfig {
  double temperature = 1.0;
  // 0 keeps every id.
  int64_t top_k = 0;
  double top_p = 1.0;
  uint64_t seed = 0;

  void validate() const;
};

Json to_json(const SamplerConfig& config);
SamplerConfig sampler_config_from_json(const Json& j, const SamplerConfig& defaults = {});

// Temperature, then top-k by logit, then the smallest probability-sorted
// prefix with mass >= top_p, renormalised. Ties keep the lower id first.
// Returns a full-length probability vector with zeros outside the support.
std::vector<double> truncated_distribution(const std::vector<double>& logits, const SamplerConfig& config);

int64_t sample_categorical(const std::vector<double>& probs, std::mt19937_64& rng);
int64_t sample_next(const std::vector<double>& logits, const SamplerConfig& config, std::mt19937_64& rng);

// Independent streams, one per generated sequence.
std::vector<std::mt19937_64> make_rng_streams(uint64_t seed, int64_t n);

}  // namespace tats
