#include "prefrl/tape.hpp"

#include <algorithm>
#include <cmath>

namespace prefrl {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Gradient flowing into a scalar operand of a broadcast op collapses to the
// sum of the elementwise gradient.
Tensor reduce_to(const Tensor& target, const Tensor& g) {
  if (g.same_shape(target)) return g;
  double s = 0.0;
  for (double v : g.data) s += v;
  Tensor out = Tensor::zeros(target.shape);
  out.data[0] = s;
  return out;
}

}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&, const Tensor&)> pull, const char* op) {
  if (!value.all_finite())
    fail(std::string(op) + ": non-finite output " + value.shape_str());
  nodes_.push_back(Node{std::move(value), record_ ? std::move(pull) : nullptr});
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::val(Var v, const char* op) const {
  require(v.tape == this, std::string(op) + ": operand from a different tape");
  require(v.id < nodes_.size(), std::string(op) + ": dangling operand");
  return nodes_[v.id].value;
}

const Tensor& Tape::value(Var v) const { return val(v, "value"); }

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (grads_[id].numel() == 0) {
    grads_[id] = g;
    return;
  }
  for (std::size_t i = 0; i < g.data.size(); ++i) grads_[id].data[i] += g.data[i];
}

Var Tape::leaf(const std::string& name, Tensor value, bool trainable) {
  require(!name.empty(), "leaf: empty name");
  for (const Leaf& l : leaves_)
    require(l.name != name, "leaf: duplicate name '" + name + "'");
  Var v = push(std::move(value), nullptr, "leaf");
  leaves_.push_back(Leaf{name, v.id, trainable});
  return v;
}

Var Tape::constant(Tensor value) { return push(std::move(value), nullptr, "constant"); }

Var Tape::add(Var a, Var b) {
  const Tensor& ta = val(a, "add");
  const Tensor& tb = val(b, "add");
  if (!ta.same_shape(tb) && !ta.is_scalar() && !tb.is_scalar())
    fail("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  const Tensor& big = ta.is_scalar() ? tb : ta;
  Tensor out = Tensor::zeros(big.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = ta.data[ta.is_scalar() ? 0 : i] + tb.data[tb.is_scalar() ? 0 : i];
  return push(std::move(out),
              [a, b](Tape& t, const Tensor& g) {
                t.accumulate(a.id, reduce_to(t.nodes_[a.id].value, g));
                t.accumulate(b.id, reduce_to(t.nodes_[b.id].value, g));
              },
              "add");
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = val(a, "sub");
  const Tensor& tb = val(b, "sub");
  if (!ta.same_shape(tb) && !ta.is_scalar() && !tb.is_scalar())
    fail("sub: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  const Tensor& big = ta.is_scalar() ? tb : ta;
  Tensor out = Tensor::zeros(big.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = ta.data[ta.is_scalar() ? 0 : i] - tb.data[tb.is_scalar() ? 0 : i];
  return push(std::move(out),
              [a, b](Tape& t, const Tensor& g) {
                t.accumulate(a.id, reduce_to(t.nodes_[a.id].value, g));
                Tensor neg = g;
                for (double& v : neg.data) v = -v;
                t.accumulate(b.id, reduce_to(t.nodes_[b.id].value, neg));
              },
              "sub");
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = val(a, "mul");
  const Tensor& tb = val(b, "mul");
  if (!ta.same_shape(tb) && !ta.is_scalar() && !tb.is_scalar())
    fail("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  const Tensor& big = ta.is_scalar() ? tb : ta;
  Tensor out = Tensor::zeros(big.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = ta.data[ta.is_scalar() ? 0 : i] * tb.data[tb.is_scalar() ? 0 : i];
  return push(std::move(out),
              [a, b](Tape& t, const Tensor& g) {
                const Tensor& ta = t.nodes_[a.id].value;
                const Tensor& tb = t.nodes_[b.id].value;
                Tensor ga = Tensor::zeros(g.shape);
                Tensor gb = Tensor::zeros(g.shape);
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                  ga.data[i] = g.data[i] * tb.data[tb.is_scalar() ? 0 : i];
                  gb.data[i] = g.data[i] * ta.data[ta.is_scalar() ? 0 : i];
                }
                t.accumulate(a.id, reduce_to(ta, ga));
                t.accumulate(b.id, reduce_to(tb, gb));
              },
              "mul");
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = val(a, "matmul");
  const Tensor& tb = val(b, "matmul");
  if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
    fail("matmul: incompatible shapes " + ta.shape_str() + " vs " + tb.shape_str());
  const std::size_t r = ta.shape[0], k = ta.shape[1], c = tb.shape[1];
  Tensor out = Tensor::zeros({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ta.data[i * k + p] * tb.data[p * c + j];
      out.data[i * c + j] = acc;
    }
  return push(std::move(out),
              [a, b, r, k, c](Tape& t, const Tensor& g) {
                const Tensor& ta = t.nodes_[a.id].value;
                const Tensor& tb = t.nodes_[b.id].value;
                Tensor ga = Tensor::zeros(ta.shape);
                Tensor gb = Tensor::zeros(tb.shape);
                for (std::size_t i = 0; i < r; ++i)
                  for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < c; ++j)
                      acc += g.data[i * c + j] * tb.data[p * c + j];
                    ga.data[i * k + p] = acc;
                  }
                for (std::size_t p = 0; p < k; ++p)
                  for (std::size_t j = 0; j < c; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < r; ++i)
                      acc += ta.data[i * k + p] * g.data[i * c + j];
                    gb.data[p * c + j] = acc;
                  }
                t.accumulate(a.id, ga);
                t.accumulate(b.id, gb);
              },
              "matmul");
}

Var Tape::sum(Var x) {
  const Tensor& tx = val(x, "sum");
  double s = 0.0;
  for (double v : tx.data) s += v;
  return push(Tensor::scalar(s),
              [x](Tape& t, const Tensor& g) {
                t.accumulate(x.id, Tensor::full(t.nodes_[x.id].value.shape, g.data[0]));
              },
              "sum");
}

Var Tape::mean(Var x) {
  const Tensor& tx = val(x, "mean");
  double s = 0.0;
  for (double v : tx.data) s += v;
  const double n = static_cast<double>(tx.numel());
  return push(Tensor::scalar(s / n),
              [x, n](Tape& t, const Tensor& g) {
                t.accumulate(x.id, Tensor::full(t.nodes_[x.id].value.shape, g.data[0] / n));
              },
              "mean");
}

Var Tape::sigmoid(Var x) {
  const Tensor& tx = val(x, "sigmoid");
  Tensor out = Tensor::zeros(tx.shape);
  for (std::size_t i = 0; i < tx.data.size(); ++i) out.data[i] = stable_sigmoid(tx.data[i]);
  Var v = push(std::move(out),
               [](Tape&, const Tensor&) {},  // replaced below
               "sigmoid");
  nodes_[v.id].pull = record_ ? std::function<void(Tape&, const Tensor&)>(
                                    [x, v](Tape& t, const Tensor& g) {
                                      const Tensor& y = t.nodes_[v.id].value;
                                      Tensor gx = Tensor::zeros(y.shape);
                                      for (std::size_t i = 0; i < y.data.size(); ++i)
                                        gx.data[i] = g.data[i] * y.data[i] * (1.0 - y.data[i]);
                                      t.accumulate(x.id, gx);
                                    })
                              : nullptr;
  return v;
}

Var Tape::log(Var x) {
  const Tensor& tx = val(x, "log");
  Tensor out = Tensor::zeros(tx.shape);
  for (std::size_t i = 0; i < tx.data.size(); ++i) out.data[i] = std::log(tx.data[i]);
  return push(std::move(out),
              [x](Tape& t, const Tensor& g) {
                const Tensor& in = t.nodes_[x.id].value;
                Tensor gx = Tensor::zeros(in.shape);
                for (std::size_t i = 0; i < in.data.size(); ++i)
                  gx.data[i] = g.data[i] / in.data[i];
                t.accumulate(x.id, gx);
              },
              "log");
}

Var Tape::exp(Var x) {
  const Tensor& tx = val(x, "exp");
  Tensor out = Tensor::zeros(tx.shape);
  for (std::size_t i = 0; i < tx.data.size(); ++i) out.data[i] = std::exp(tx.data[i]);
  Var v = push(std::move(out), nullptr, "exp");
  nodes_[v.id].pull = record_ ? std::function<void(Tape&, const Tensor&)>(
                                    [x, v](Tape& t, const Tensor& g) {
                                      const Tensor& y = t.nodes_[v.id].value;
                                      Tensor gx = Tensor::zeros(y.shape);
                                      for (std::size_t i = 0; i < y.data.size(); ++i)
                                        gx.data[i] = g.data[i] * y.data[i];
                                      t.accumulate(x.id, gx);
                                    })
                              : nullptr;
  return v;
}

Var Tape::tanh(Var x) {
  const Tensor& tx = val(x, "tanh");
  Tensor out = Tensor::zeros(tx.shape);
  for (std::size_t i = 0; i < tx.data.size(); ++i) out.data[i] = std::tanh(tx.data[i]);
  Var v = push(std::move(out), nullptr, "tanh");
  nodes_[v.id].pull = record_ ? std::function<void(Tape&, const Tensor&)>(
                                    [x, v](Tape& t, const Tensor& g) {
                                      const Tensor& y = t.nodes_[v.id].value;
                                      Tensor gx = Tensor::zeros(y.shape);
                                      for (std::size_t i = 0; i < y.data.size(); ++i)
                                        gx.data[i] = g.data[i] * (1.0 - y.data[i] * y.data[i]);
                                      t.accumulate(x.id, gx);
                                    })
                              : nullptr;
  return v;
}

Var Tape::softmax(Var x) {
  const Tensor& tx = val(x, "softmax");
  const std::size_t r = tx.rows(), c = tx.cols();
  Tensor out = Tensor::zeros(tx.shape);
  for (std::size_t i = 0; i < r; ++i) {
    double m = tx.data[i * c];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, tx.data[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out.data[i * c + j] = std::exp(tx.data[i * c + j] - m);
      s += out.data[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] /= s;
  }
  Var v = push(std::move(out), nullptr, "softmax");
  nodes_[v.id].pull = record_ ? std::function<void(Tape&, const Tensor&)>(
                                    [x, v, r, c](Tape& t, const Tensor& g) {
                                      const Tensor& y = t.nodes_[v.id].value;
                                      Tensor gx = Tensor::zeros(y.shape);
                                      for (std::size_t i = 0; i < r; ++i) {
                                        double dot = 0.0;
                                        for (std::size_t j = 0; j < c; ++j)
                                          dot += g.data[i * c + j] * y.data[i * c + j];
                                        for (std::size_t j = 0; j < c; ++j)
                                          gx.data[i * c + j] =
                                              y.data[i * c + j] * (g.data[i * c + j] - dot);
                                      }
                                      t.accumulate(x.id, gx);
                                    })
                              : nullptr;
  return v;
}

Var Tape::clip(Var x, double lo, double hi) {
  require(lo < hi, "clip: requires lo < hi");
  const Tensor& tx = val(x, "clip");
  Tensor out = Tensor::zeros(tx.shape);
  for (std::size_t i = 0; i < tx.data.size(); ++i)
    out.data[i] = std::min(hi, std::max(lo, tx.data[i]));
  // Subgradient is 1 on [lo, hi] (boundary assigned to the interior branch)
  // and 0 outside.
  return push(std::move(out),
              [x, lo, hi](Tape& t, const Tensor& g) {
                const Tensor& in = t.nodes_[x.id].value;
                Tensor gx = Tensor::zeros(in.shape);
                for (std::size_t i = 0; i < in.data.size(); ++i)
                  gx.data[i] = (in.data[i] >= lo && in.data[i] <= hi) ? g.data[i] : 0.0;
                t.accumulate(x.id, gx);
              },
              "clip");
}

Var Tape::gather(Var x, const std::vector<std::size_t>& indices) {
  const Tensor& tx = val(x, "gather");
  const std::size_t r = tx.rows(), c = tx.cols();
  if (tx.rank() == 2)
    require(indices.size() == r, "gather: need one index per row of " + tx.shape_str());
  Tensor out = Tensor::zeros({indices.size()});
  if (tx.rank() == 2) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
      require(indices[i] < c, "gather: index out of range for " + tx.shape_str());
      out.data[i] = tx.data[i * c + indices[i]];
    }
  } else {
    for (std::size_t i = 0; i < indices.size(); ++i) {
      require(indices[i] < tx.numel(), "gather: index out of range for " + tx.shape_str());
      out.data[i] = tx.data[indices[i]];
    }
  }
  const bool rank2 = tx.rank() == 2;
  return push(std::move(out),
              [x, indices, rank2, c](Tape& t, const Tensor& g) {
                const Tensor& in = t.nodes_[x.id].value;
                Tensor gx = Tensor::zeros(in.shape);
                for (std::size_t i = 0; i < indices.size(); ++i) {
                  if (rank2)
                    gx.data[i * c + indices[i]] += g.data[i];
                  else
                    gx.data[indices[i]] += g.data[i];
                }
                t.accumulate(x.id, gx);
              },
              "gather");
}

Var Tape::gather_rows(Var x, const std::vector<std::size_t>& indices) {
  const Tensor& tx = val(x, "gather_rows");
  require(tx.rank() == 2, "gather_rows: needs rank-2 input, got " + tx.shape_str());
  const std::size_t r = tx.shape[0], c = tx.shape[1];
  Tensor out = Tensor::zeros({indices.size(), c});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < r, "gather_rows: row index out of range for " + tx.shape_str());
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = tx.data[indices[i] * c + j];
  }
  return push(std::move(out),
              [x, indices, c](Tape& t, const Tensor& g) {
                const Tensor& in = t.nodes_[x.id].value;
                Tensor gx = Tensor::zeros(in.shape);
                for (std::size_t i = 0; i < indices.size(); ++i)
                  for (std::size_t j = 0; j < c; ++j)
                    gx.data[indices[i] * c + j] += g.data[i * c + j];
                t.accumulate(x.id, gx);
              },
              "gather_rows");
}

Var Tape::concat(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat: no inputs");
  const Tensor& first = val(parts[0], "concat");
  const std::size_t rank = first.rank();
  const std::size_t c = first.cols();
  std::size_t total_rows = 0;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& tp = val(p, "concat");
    require(tp.rank() == rank, "concat: mixed ranks");
    if (rank == 2)
      require(tp.cols() == c, "concat: column mismatch " + tp.shape_str());
    total_rows += tp.rows();
    total += tp.numel();
  }
  Tensor out = rank == 2 ? Tensor::zeros({total_rows, c}) : Tensor::zeros({total});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& tp = val(p, "concat");
    std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + off);
    off += tp.numel();
  }
  return push(std::move(out),
              [parts](Tape& t, const Tensor& g) {
                std::size_t off = 0;
                for (Var p : parts) {
                  const Tensor& tp = t.nodes_[p.id].value;
                  Tensor gp = Tensor::zeros(tp.shape);
                  std::copy(g.data.begin() + off, g.data.begin() + off + tp.numel(),
                            gp.data.begin());
                  off += tp.numel();
                  t.accumulate(p.id, gp);
                }
              },
              "concat");
}

Var Tape::minimum(Var a, Var b) {
  const Tensor& ta = val(a, "minimum");
  const Tensor& tb = val(b, "minimum");
  if (!ta.same_shape(tb))
    fail("minimum: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = Tensor::zeros(ta.shape);
  for (std::size_t i = 0; i < ta.data.size(); ++i)
    out.data[i] = std::min(ta.data[i], tb.data[i]);
  // Ties route the gradient to the first argument.
  return push(std::move(out),
              [a, b](Tape& t, const Tensor& g) {
                const Tensor& ta = t.nodes_[a.id].value;
                const Tensor& tb = t.nodes_[b.id].value;
                Tensor ga = Tensor::zeros(ta.shape);
                Tensor gb = Tensor::zeros(tb.shape);
                for (std::size_t i = 0; i < ta.data.size(); ++i) {
                  if (ta.data[i] <= tb.data[i])
                    ga.data[i] = g.data[i];
                  else
                    gb.data[i] = g.data[i];
                }
                t.accumulate(a.id, ga);
                t.accumulate(b.id, gb);
              },
              "minimum");
}

Var Tape::scale(Var x, double c) {
  require(std::isfinite(c), "scale: non-finite factor");
  const Tensor& tx = val(x, "scale");
  Tensor out = Tensor::zeros(tx.shape);
  for (std::size_t i = 0; i < tx.data.size(); ++i) out.data[i] = c * tx.data[i];
  return push(std::move(out),
              [x, c](Tape& t, const Tensor& g) {
                Tensor gx = Tensor::zeros(g.shape);
                for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[i] = c * g.data[i];
                t.accumulate(x.id, gx);
              },
              "scale");
}

Var Tape::flatten(Var x) {
  const Tensor& tx = val(x, "flatten");
  return push(Tensor::vec(tx.data),
              [x](Tape& t, const Tensor& g) {
                const Tensor& in = t.nodes_[x.id].value;
                t.accumulate(x.id, Tensor(in.shape, g.data));
              },
              "flatten");
}

GradMap Tape::backward(Var loss) {
  require(record_, "backward: tape was built with gradients disabled");
  require(!consumed_, "backward: graph already consumed by a previous backward pass");
  consumed_ = true;
  const Tensor& tl = val(loss, "backward");
  require(tl.is_scalar(), "backward: loss must be scalar, got " + tl.shape_str());

  grads_.assign(nodes_.size(), Tensor{});
  grads_[loss.id] = Tensor::scalar(1.0);

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (grads_[i].numel() == 0 || !nodes_[i].pull) continue;
    nodes_[i].pull(*this, grads_[i]);
  }

  GradMap out;
  for (const Leaf& l : leaves_) {
    if (l.trainable && grads_[l.id].numel() != 0)
      out[l.name] = grads_[l.id];
    else
      out[l.name] = Tensor::zeros(nodes_[l.id].value.shape);
  }
  return out;
}

}  // namespace prefrl
