#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "prefrl/params.hpp"
#include "prefrl/tape.hpp"

namespace prefrl {

// Adam with the standard defaults. The moments live outside ModelParams so a
// parameter snapshot stays a plain value.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return step_; }

  // One update. Frozen parameters are left untouched bit-for-bit; grads must
  // contain an entry for every trainable parameter. Deterministic given the
  // state.
  void step(ModelParams& params, const GradMap& grads, double lr);

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  AdamConfig cfg_;
  std::map<std::string, Moments> moments_;
  std::int64_t step_ = 0;
};

}  // namespace prefrl
