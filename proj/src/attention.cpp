#include "tats/attention.hpp"

#include <sstream>
#include <stdexcept>

namespace tats {

std::string AttentionLayout::dump() const {
  auto acc = allowed.accessor<bool, 2>();
  std::ostringstream out;
  for (int64_t q = 0; q < n_positions; ++q) {
    switch (roles[static_cast<size_t>(q)]) {
      case PositionRole::kCondition:
        out << 'C';
        break;
      case PositionRole::kSequence:
        out << 'S';
        break;
      case PositionRole::kAnchorFront:
        out << 'A';
        break;
      case PositionRole::kMiddle:
        out << 'M';
        break;
      case PositionRole::kAnchorBack:
        out << 'B';
        break;
    }
    out << ' ';
    for (int64_t k = 0; k < n_positions; ++k) out << (acc[q][k] ? '1' : '.');
    out << '\n';
  }
  return out.str();
}

AttentionLayout causal_layout(int64_t n, int64_t n_prefix) {
  if (n < 1 || n_prefix < 0 || n_prefix > n) throw std::invalid_argument("causal layout needs 0 <= n_prefix <= n, n >= 1");
  AttentionLayout layout;
  layout.n_positions = n;
  layout.allowed = torch::ones({n, n}, torch::kBool).tril();
  layout.roles.assign(static_cast<size_t>(n), PositionRole::kSequence);
  for (int64_t i = 0; i < n_prefix; ++i) layout.roles[static_cast<size_t>(i)] = PositionRole::kCondition;
  for (int64_t i = n_prefix; i < n; ++i) layout.loss_positions.push_back(i);
  layout.target_shift = 1;
  return layout;
}

namespace {

AttentionLayout build_interpolation(int64_t slice_len, int64_t n_middle_slices, int64_t n_prefix, bool leak) {
  if (slice_len < 1 || n_middle_slices < 1 || n_prefix < 0) {
    throw std::invalid_argument("interpolation layout needs slice_len >= 1 and n_middle_slices >= 1");
  }
  const int64_t m = slice_len * n_middle_slices;
  const int64_t front = n_prefix;
  const int64_t mid = front + slice_len;
  const int64_t back = mid + m;
  const int64_t n = back + slice_len;

  AttentionLayout layout;
  layout.n_positions = n;
  layout.target_shift = 0;
  layout.roles.resize(static_cast<size_t>(n));
  auto allowed = torch::zeros({n, n}, torch::kBool);
  auto acc = allowed.accessor<bool, 2>();
  auto is_anchor = [&](int64_t p) { return (p >= front && p < mid) || p >= back; };
  for (int64_t q = 0; q < n; ++q) {
    PositionRole role = PositionRole::kCondition;
    if (q >= back) {
      role = PositionRole::kAnchorBack;
    } else if (q >= mid) {
      role = PositionRole::kMiddle;
    } else if (q >= front) {
      role = PositionRole::kAnchorFront;
    }
    layout.roles[static_cast<size_t>(q)] = role;
    for (int64_t k = 0; k < n; ++k) {
      bool ok = false;
      if (k < n_prefix) {
        ok = role != PositionRole::kCondition || k <= q;
      } else if (role == PositionRole::kCondition) {
        ok = false;
      } else if (is_anchor(k)) {
        ok = true;
      } else if (role == PositionRole::kMiddle) {
        ok = k <= q;
      } else if (role == PositionRole::kAnchorBack) {
        ok = leak;
      }
      acc[q][k] = ok;
    }
    if (role == PositionRole::kMiddle) layout.loss_positions.push_back(q);
  }
  layout.allowed = allowed;
  return layout;
}

}  // namespace

AttentionLayout interpolation_layout(int64_t slice_len, int64_t n_middle_slices, int64_t n_prefix) {
  return build_interpolation(slice_len, n_middle_slices, n_prefix, false);
}

AttentionLayout leaky_interpolation_layout(int64_t slice_len, int64_t n_middle_slices, int64_t n_prefix) {
  return build_interpolation(slice_len, n_middle_slices, n_prefix, true);
}

}  // namespace tats
