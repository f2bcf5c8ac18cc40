#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "prefrl/tensor.hpp"

namespace prefrl {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
  const Tape* tape = nullptr;
  std::size_t id = 0;
};

using GradMap = std::map<std::string, Tensor>;

// Reverse-mode autodiff over a build-order tape. Nodes are appended in
// topological order by construction, so the backward sweep is a single
// reverse pass that touches each node once. A tape built with
// record_grads=false evaluates forward values only (used for rollouts and
// scoring); the arithmetic is identical in both modes.
//
// Graph construction and backward are single-threaded per tape.
class Tape {
 public:
  explicit Tape(bool record_grads = true) : record_(record_grads) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(const std::string& name, Tensor value, bool trainable);
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  bool recording() const { return record_; }
  std::size_t node_count() const { return nodes_.size(); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var matmul(Var a, Var b);
  Var sum(Var x);
  Var mean(Var x);
  Var sigmoid(Var x);
  Var log(Var x);
  Var exp(Var x);
  Var tanh(Var x);
  Var softmax(Var x);  // last axis
  Var clip(Var x, double lo, double hi);
  Var gather(Var x, const std::vector<std::size_t>& indices);       // per-row element
  Var gather_rows(Var x, const std::vector<std::size_t>& indices);  // row selection
  Var concat(const std::vector<Var>& parts);
  Var minimum(Var a, Var b);
  Var scale(Var x, double c);
  Var flatten(Var x);  // reshape to rank-1, same element order

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once. Returns a gradient
  // for every named leaf: the accumulated gradient for trainable leaves,
  // zeros for frozen ones. A tape can be swept only once.
  GradMap backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::function<void(Tape&, const Tensor&)> pull;
  };
  struct Leaf {
    std::string name;
    std::size_t id;
    bool trainable;
  };

  Var push(Tensor value, std::function<void(Tape&, const Tensor&)> pull, const char* op);
  const Tensor& val(Var v, const char* op) const;
  void accumulate(std::size_t id, const Tensor& g);

  std::vector<Node> nodes_;
  std::vector<Leaf> leaves_;
  std::vector<Tensor> grads_;
  bool record_ = true;
  bool consumed_ = false;
};

}  // namespace prefrl
