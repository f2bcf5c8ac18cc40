#pragma once

#include <map>
#include <string>

#include "prefrl/tensor.hpp"

namespace prefrl {

struct Param {
  Tensor value;
  bool trainable = true;
};

// Named parameter tensors with per-tensor trainable masks. Shared by the
// policy, reference, critic, and reward models. std::map keeps iteration
// order deterministic for optimizer sweeps and serialization.
struct ModelParams {
  std::map<std::string, Param> tensors;

  bool has(const std::string& name) const { return tensors.count(name) != 0; }

  const Param& param(const std::string& name) const {
    auto it = tensors.find(name);
    require(it != tensors.end(), "params: unknown tensor '" + name + "'");
    return it->second;
  }

  const Tensor& tensor(const std::string& name) const { return param(name).value; }
};

// Bitwise equality, used by the frozen-parameter contract checks.
inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape && a.data == b.data;
}

inline bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  auto ia = a.tensors.begin();
  auto ib = b.tensors.begin();
  for (; ia != a.tensors.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (ia->second.trainable != ib->second.trainable) return false;
    if (!bitwise_equal(ia->second.value, ib->second.value)) return false;
  }
  return true;
}

}  // namespace prefrl
