#include "prefrl/optim.hpp"

#include <cmath>

namespace prefrl {

void AdamState::step(ModelParams& params, const GradMap& grads, double lr) {
  require(lr > 0.0, "adam: learning rate must be positive, got " + std::to_string(lr));
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

  for (auto& [name, param] : params.tensors) {
    if (!param.trainable) continue;
    auto git = grads.find(name);
    require(git != grads.end(), "adam: missing gradient for trainable parameter '" + name + "'");
    const Tensor& g = git->second;
    require(g.same_shape(param.value),
            "adam: gradient shape " + g.shape_str() + " does not match parameter '" + name +
                "' " + param.value.shape_str());

    auto [mit, inserted] = moments_.try_emplace(name);
    if (inserted) {
      mit->second.m = Tensor::zeros(param.value.shape);
      mit->second.v = Tensor::zeros(param.value.shape);
    }
    Tensor& m = mit->second.m;
    Tensor& v = mit->second.v;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
      v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      param.value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    require(param.value.all_finite(), "adam: parameter '" + name + "' became non-finite");
  }
}

}  // namespace prefrl
