#pragma once

#include <stdexcept>
#include <string>

namespace tats {

// Invalid configuration or arguments. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss, logits or parameters during training. The CLI maps this to
// exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tats
