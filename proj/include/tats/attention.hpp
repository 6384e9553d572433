#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

namespace tats {

enum class PositionRole { kCondition, kSequence, kAnchorFront, kMiddle, kAnchorBack };

// Which query positions may attend which keys, and where the loss applies.
struct AttentionLayout {
  int64_t n_positions = 0;
  torch::Tensor allowed;  // n x n bool, [query][key]
  std::vector<PositionRole> roles;
  // Positions whose token is a training target.
  std::vector<int64_t> loss_positions;
  // Logits at (p - target_shift) predict the token at p: 1 for next-token
  // (causal) layouts, 0 for interpolation middles.
  int64_t target_shift = 1;

  bool allows(int64_t query, int64_t key) const { return allowed[query][key].item<bool>(); }
  // One row per query: role letter, then '1'/'.' per key.
  std::string dump() const;
};

// allowed(q, k) = k <= q. Condition/SOS tokens occupy [0, n_prefix) and are
// never targets.
AttentionLayout causal_layout(int64_t n, int64_t n_prefix);

// Order: [prefix][anchor_front x slice_len][middle x slice_len*n_middle]
// [anchor_back x slice_len]. Middle queries see the prefix, both anchors and
// middle positions <= themselves; anchor queries see the prefix and anchors
// only, never a middle position. Loss on middle positions, equal-position
// targets (middle inputs are shifted right by one).
AttentionLayout interpolation_layout(int64_t slice_len, int64_t n_middle_slices, int64_t n_prefix = 0);

// The broken variant where the back anchor also attends every middle token;
// in a multi-layer model this routes middle tokens back to themselves.
AttentionLayout leaky_interpolation_layout(int64_t slice_len, int64_t n_middle_slices, int64_t n_prefix = 0);

}  // namespace tats
