#include "mriqc/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mriqc/threading.hpp"

namespace mriqc {

// ---- tape core ------------------------------------------------------------

Var Tape::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return {this, int(nodes_.size()) - 1};
}

Var Tape::param(Tensor t, std::string name, bool trainable) {
  Node n;
  n.value = std::move(t);
  n.leaf = true;
  n.trainable = trainable;
  n.requires_grad = trainable;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  return {this, int(nodes_.size()) - 1};
}

Var Tape::make_node(Tensor value, std::vector<int> inputs,
                    std::function<void(Tape&, int)> fwd,
                    std::function<void(Tape&, int)> bwd) {
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  for (int in : n.inputs)
    if (node(in).requires_grad) n.requires_grad = true;
  n.fwd = std::move(fwd);
  n.bwd = std::move(bwd);
  nodes_.push_back(std::move(n));
  const int id = int(nodes_.size()) - 1;
  if (nodes_[id].fwd) nodes_[id].fwd(*this, id);
  return {this, id};
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = node(id);
  if (n.grad.count() != n.value.count()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

const Tensor& Tape::grad(Var v) {
  return grad_buffer(v.id);
}

void Tape::set_value(Var v, Tensor t) {
  Node& n = node(v.id);
  require(n.leaf, "set_value is only valid on leaves");
  require(t.same_shape(n.value), "set_value: shape mismatch ", t.shape_str(), " vs ",
          n.value.shape_str());
  n.value = std::move(t);
}

void Tape::backward(Var output) {
  require(output.tape == this, "backward: variable belongs to another tape");
  Node& out = node(output.id);
  require(out.value.count() == 1, "backward needs a scalar output, shape is ",
          out.value.shape_str());

  for (auto& n : nodes_) n.grad = Tensor();

  if (!out.requires_grad) return;  // nothing trainable upstream

  // mark gradient-carrying nodes reachable from the output
  std::vector<char> needed(nodes_.size(), 0);
  std::vector<int> stack = {output.id};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    if (needed[id]) continue;
    needed[id] = 1;
    for (int in : nodes_[id].inputs)
      if (nodes_[in].requires_grad && !needed[in]) stack.push_back(in);
  }

  grad_buffer(output.id)[0] = 1.0;
  for (int id = output.id; id >= 0; --id) {
    if (!needed[id] || !nodes_[id].bwd) continue;
    if (nodes_[id].grad.count() == 0) continue;  // no gradient reached this node
    nodes_[id].bwd(*this, id);
  }
}

void Tape::replay() {
  for (int id = 0; id < size(); ++id)
    if (nodes_[id].fwd) nodes_[id].fwd(*this, id);
}

std::vector<Var> Tape::trainable_params() {
  std::vector<Var> out;
  for (int id = 0; id < size(); ++id)
    if (nodes_[id].trainable) out.push_back({this, id});
  return out;
}

// ---- helpers ----------------------------------------------------------------

namespace {

Tape* same_tape(Var a, Var b, const char* op) {
  require(a.tape && b.tape && a.tape == b.tape, op,
          ": variables must live on the same tape");
  return a.tape;
}

// Accumulates g (shaped like the consumer output) into input `id`,
// collapsing to a sum when the input is a broadcast scalar.
void accumulate(Tape& t, int id, const Tensor& g) {
  if (!t.node(id).requires_grad) return;
  Tensor& dst = t.grad_buffer(id);
  if (dst.count() == g.count()) {
    for (std::int64_t i = 0; i < g.count(); ++i) dst[i] += g[i];
  } else {
    double s = 0.0;
    for (std::int64_t i = 0; i < g.count(); ++i) s += g[i];
    dst[0] += s;
  }
}

enum class BroadcastKind { Same, AScalar, BScalar };

BroadcastKind classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return BroadcastKind::Same;
  if (a.count() == 1) return BroadcastKind::AScalar;
  if (b.count() == 1) return BroadcastKind::BScalar;
  fail(op, ": shape mismatch ", a.shape_str(), " vs ", b.shape_str());
}

template <typename F>
void eval_binary(const char* op, const Tensor& a, const Tensor& b, Tensor& out, F f) {
  switch (classify(a, b, op)) {
    case BroadcastKind::Same:
      out = Tensor(a.shape());
      for (std::int64_t i = 0; i < a.count(); ++i) out[i] = f(a[i], b[i]);
      break;
    case BroadcastKind::AScalar:
      out = Tensor(b.shape());
      for (std::int64_t i = 0; i < b.count(); ++i) out[i] = f(a[0], b[i]);
      break;
    case BroadcastKind::BScalar:
      out = Tensor(a.shape());
      for (std::int64_t i = 0; i < a.count(); ++i) out[i] = f(a[i], b[0]);
      break;
  }
}

double at_bcast(const Tensor& t, std::int64_t i) {
  return t.count() == 1 ? t[0] : t[i];
}

}  // namespace

// ---- binary ops ---------------------------------------------------------------

Var add(Var a, Var b) {
  Tape& t = *same_tape(a, b, "add");
  auto fwd = [ai = a.id, bi = b.id](Tape& t, int self) {
    eval_binary("add", t.node(ai).value, t.node(bi).value, t.node(self).value,
                [](double x, double y) { return x + y; });
  };
  auto bwd = [ai = a.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    accumulate(t, ai, g);
    accumulate(t, bi, g);
  };
  return t.make_node({}, {a.id, b.id}, fwd, bwd);
}

Var sub(Var a, Var b) {
  Tape& t = *same_tape(a, b, "sub");
  auto fwd = [ai = a.id, bi = b.id](Tape& t, int self) {
    eval_binary("sub", t.node(ai).value, t.node(bi).value, t.node(self).value,
                [](double x, double y) { return x - y; });
  };
  auto bwd = [ai = a.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    accumulate(t, ai, g);
    if (t.node(bi).requires_grad) {
      Tensor neg_g(g.shape());
      for (std::int64_t i = 0; i < g.count(); ++i) neg_g[i] = -g[i];
      accumulate(t, bi, neg_g);
    }
  };
  return t.make_node({}, {a.id, b.id}, fwd, bwd);
}

Var mul(Var a, Var b) {
  Tape& t = *same_tape(a, b, "mul");
  auto fwd = [ai = a.id, bi = b.id](Tape& t, int self) {
    eval_binary("mul", t.node(ai).value, t.node(bi).value, t.node(self).value,
                [](double x, double y) { return x * y; });
  };
  auto bwd = [ai = a.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& av = t.node(ai).value;
    const Tensor& bv = t.node(bi).value;
    if (t.node(ai).requires_grad) {
      Tensor ga(g.shape());
      for (std::int64_t i = 0; i < g.count(); ++i) ga[i] = g[i] * at_bcast(bv, i);
      accumulate(t, ai, ga);
    }
    if (t.node(bi).requires_grad) {
      Tensor gb(g.shape());
      for (std::int64_t i = 0; i < g.count(); ++i) gb[i] = g[i] * at_bcast(av, i);
      accumulate(t, bi, gb);
    }
  };
  return t.make_node({}, {a.id, b.id}, fwd, bwd);
}

Var maximum(Var a, Var b) {
  Tape& t = *same_tape(a, b, "maximum");
  auto fwd = [ai = a.id, bi = b.id](Tape& t, int self) {
    eval_binary("maximum", t.node(ai).value, t.node(bi).value, t.node(self).value,
                [](double x, double y) { return x >= y ? x : y; });
  };
  auto bwd = [ai = a.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    const Tensor& av = t.node(ai).value;
    const Tensor& bv = t.node(bi).value;
    Tensor ga(g.shape()), gb(g.shape());
    for (std::int64_t i = 0; i < g.count(); ++i) {
      if (at_bcast(av, i) >= at_bcast(bv, i)) ga[i] = g[i];  // ties go to a
      else gb[i] = g[i];
    }
    accumulate(t, ai, ga);
    accumulate(t, bi, gb);
  };
  return t.make_node({}, {a.id, b.id}, fwd, bwd);
}

// ---- unary ops ------------------------------------------------------------------

namespace {

// df(x, y) where y is the stored output value
Var unary(const char* name, Var a, double (*f)(double), double (*df)(double, double),
          bool check_positive = false) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id, f, check_positive, name](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    if (check_positive)
      for (std::int64_t i = 0; i < av.count(); ++i)
        require(av[i] > 0.0, name, ": input must be positive, got ", av[i],
                " at index ", i);
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.count(); ++i) out[i] = f(av[i]);
    t.node(self).value = std::move(out);
  };
  auto bwd = [ai = a.id, df](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const Tensor& av = t.node(ai).value;
    const Tensor& ov = t.node(self).value;
    Tensor ga(g.shape());
    for (std::int64_t i = 0; i < g.count(); ++i) ga[i] = g[i] * df(av[i], ov[i]);
    accumulate(t, ai, ga);
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

}  // namespace

Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id, c](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.count(); ++i) out[i] = av[i] + c;
    t.node(self).value = std::move(out);
  };
  auto bwd = [ai = a.id](Tape& t, int self) { accumulate(t, ai, t.node(self).grad); };
  return t.make_node({}, {a.id}, fwd, bwd);
}

Var mul_scalar(Var a, double c) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id, c](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.count(); ++i) out[i] = av[i] * c;
    t.node(self).value = std::move(out);
  };
  auto bwd = [ai = a.id, c](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const Tensor& g = t.node(self).grad;
    Tensor ga(g.shape());
    for (std::int64_t i = 0; i < g.count(); ++i) ga[i] = g[i] * c;
    accumulate(t, ai, ga);
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

Var neg(Var a) { return mul_scalar(a, -1.0); }

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var log(Var a) {
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; }, /*check_positive=*/true);
}

Var reciprocal(Var a) {
  return unary("reciprocal", a, [](double x) { return 1.0 / x; },
               [](double, double y) { return -y * y; });
}

Var abs(Var a) {
  return unary("abs", a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : x < 0.0 ? -1.0 : 0.0; });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var a) {
  return unary("softplus", a,
               [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
               [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var custom_unary(Var a, std::function<double(double)> f,
                 std::function<double(double)> df) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id, f](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.count(); ++i) out[i] = f(av[i]);
    t.node(self).value = std::move(out);
  };
  auto bwd = [ai = a.id, df](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const Tensor& av = t.node(ai).value;
    Tensor ga(g.shape());
    for (std::int64_t i = 0; i < g.count(); ++i) ga[i] = g[i] * df(av[i]);
    accumulate(t, ai, ga);
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

// ---- reductions ------------------------------------------------------------------

Var sum(Var a) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    double s = 0.0;
    for (std::int64_t i = 0; i < av.count(); ++i) s += av[i];
    t.node(self).value = Tensor::scalar(s);
  };
  auto bwd = [ai = a.id](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const double g = t.node(self).grad[0];
    Tensor& dst = t.grad_buffer(ai);
    for (std::int64_t i = 0; i < dst.count(); ++i) dst[i] += g;
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

Var mean(Var a) {
  const double inv_n = 1.0 / double(a.tape->value(a).count());
  return mul_scalar(sum(a), inv_n);
}

Var reduce_max(Var a) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    double m = av[0];
    for (std::int64_t i = 1; i < av.count(); ++i) m = std::max(m, av[i]);
    t.node(self).value = Tensor::scalar(m);
  };
  auto bwd = [ai = a.id](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const Tensor& av = t.node(ai).value;
    std::int64_t arg = 0;
    for (std::int64_t i = 1; i < av.count(); ++i)
      if (av[i] > av[arg]) arg = i;  // first maximum wins
    t.grad_buffer(ai)[arg] += t.node(self).grad[0];
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

// ---- structural ops -----------------------------------------------------------------

Var slice(Var a, int axis, std::int64_t start, std::int64_t len) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  require(axis >= 0 && axis < av.rank(), "slice: axis ", axis, " out of range for ",
          av.shape_str());
  require(start >= 0 && len >= 1 && start + len <= av.dim(axis),
          "slice: range [", start, ",", start + len, ") invalid for axis size ",
          av.dim(axis));

  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= av.dim(i);
  for (int i = axis + 1; i < av.rank(); ++i) inner *= av.dim(i);
  const std::int64_t n = av.dim(axis);

  auto fwd = [ai = a.id, axis, start, len, outer, inner, n](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    auto shape = av.shape();
    shape[axis] = len;
    Tensor out(shape);
    for (std::int64_t o = 0; o < outer; ++o)
      std::memcpy(out.data() + o * len * inner,
                  av.data() + (o * n + start) * inner,
                  std::size_t(len * inner) * sizeof(double));
    t.node(self).value = std::move(out);
  };
  auto bwd = [ai = a.id, start, len, outer, inner, n](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const Tensor& g = t.node(self).grad;
    Tensor& dst = t.grad_buffer(ai);
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* src = g.data() + o * len * inner;
      double* d = dst.data() + (o * n + start) * inner;
      for (std::int64_t i = 0; i < len * inner; ++i) d[i] += src[i];
    }
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

Var tile_channel(Var a, std::int64_t c) {
  Tape& t = *a.tape;
  require(t.value(a).dim(0) == 1, "tile_channel: input channel axis must be 1, shape is ",
          t.value(a).shape_str());
  auto fwd = [ai = a.id, c](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    auto shape = av.shape();
    shape[0] = c;
    Tensor out(shape);
    const std::int64_t n = av.count();
    for (std::int64_t k = 0; k < c; ++k)
      std::memcpy(out.data() + k * n, av.data(), std::size_t(n) * sizeof(double));
    t.node(self).value = std::move(out);
  };
  auto bwd = [ai = a.id, c](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const Tensor& g = t.node(self).grad;
    Tensor& dst = t.grad_buffer(ai);
    const std::int64_t n = dst.count();
    for (std::int64_t k = 0; k < c; ++k) {
      const double* src = g.data() + k * n;
      for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
    }
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

Var sum_channel(Var a) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    auto shape = av.shape();
    const std::int64_t c = shape[0];
    shape[0] = 1;
    Tensor out(shape);
    const std::int64_t n = out.count();
    for (std::int64_t k = 0; k < c; ++k) {
      const double* src = av.data() + k * n;
      for (std::int64_t i = 0; i < n; ++i) out[i] += src[i];
    }
    t.node(self).value = std::move(out);
  };
  auto bwd = [ai = a.id](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const Tensor& g = t.node(self).grad;
    Tensor& dst = t.grad_buffer(ai);
    const std::int64_t c = dst.shape()[0];
    const std::int64_t n = g.count();
    for (std::int64_t k = 0; k < c; ++k) {
      double* d = dst.data() + k * n;
      for (std::int64_t i = 0; i < n; ++i) d[i] += g[i];
    }
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

// ---- softmax family -----------------------------------------------------------------

Var softmax_channel(Var a) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    const std::int64_t c = av.dim(0);
    const std::int64_t n = av.count() / c;
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < n; ++i) {
      double m = av[i];
      for (std::int64_t k = 1; k < c; ++k) m = std::max(m, av[k * n + i]);
      double s = 0.0;
      for (std::int64_t k = 0; k < c; ++k) {
        double e = std::exp(av[k * n + i] - m);
        out[k * n + i] = e;
        s += e;
      }
      const double inv = 1.0 / s;
      for (std::int64_t k = 0; k < c; ++k) out[k * n + i] *= inv;
    }
    t.node(self).value = std::move(out);
  };
  auto bwd = [ai = a.id](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const Tensor& p = t.node(self).value;
    Tensor& dst = t.grad_buffer(ai);
    const std::int64_t c = p.dim(0);
    const std::int64_t n = p.count() / c;
    for (std::int64_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::int64_t k = 0; k < c; ++k) dot += g[k * n + i] * p[k * n + i];
      for (std::int64_t k = 0; k < c; ++k)
        dst[k * n + i] += p[k * n + i] * (g[k * n + i] - dot);
    }
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

Var log_softmax_channel(Var a) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id](Tape& t, int self) {
    const Tensor& av = t.node(ai).value;
    const std::int64_t c = av.dim(0);
    const std::int64_t n = av.count() / c;
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < n; ++i) {
      double m = av[i];
      for (std::int64_t k = 1; k < c; ++k) m = std::max(m, av[k * n + i]);
      double s = 0.0;
      for (std::int64_t k = 0; k < c; ++k) s += std::exp(av[k * n + i] - m);
      const double lse = m + std::log(s);
      for (std::int64_t k = 0; k < c; ++k) out[k * n + i] = av[k * n + i] - lse;
    }
    t.node(self).value = std::move(out);
  };
  auto bwd = [ai = a.id](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    const Tensor& g = t.node(self).grad;
    const Tensor& lp = t.node(self).value;
    Tensor& dst = t.grad_buffer(ai);
    const std::int64_t c = lp.dim(0);
    const std::int64_t n = lp.count() / c;
    for (std::int64_t i = 0; i < n; ++i) {
      double gsum = 0.0;
      for (std::int64_t k = 0; k < c; ++k) gsum += g[k * n + i];
      for (std::int64_t k = 0; k < c; ++k)
        dst[k * n + i] += g[k * n + i] - std::exp(lp[k * n + i]) * gsum;
    }
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

// ---- convolution ops (kernels live in conv3d.cpp) --------------------------------

Var conv3d(Var x, Var w, Var b) {
  Tape& t = *same_tape(x, w, "conv3d");
  same_tape(x, b, "conv3d");
  auto fwd = [xi = x.id, wi = w.id, bi = b.id](Tape& t, int self) {
    conv3d_forward(t.node(xi).value, t.node(wi).value, &t.node(bi).value,
                   t.node(self).value);
  };
  auto bwd = [xi = x.id, wi = w.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    if (t.node(xi).requires_grad)
      conv3d_backward_input(g, t.node(wi).value, t.grad_buffer(xi));
    const bool need_w = t.node(wi).requires_grad;
    const bool need_b = t.node(bi).requires_grad;
    if (need_w) {
      conv3d_backward_params(g, t.node(xi).value, t.grad_buffer(wi),
                             need_b ? &t.grad_buffer(bi) : nullptr);
    } else if (need_b) {
      Tensor scratch(t.node(wi).value.shape());
      conv3d_backward_params(g, t.node(xi).value, scratch, &t.grad_buffer(bi));
    }
  };
  return t.make_node({}, {x.id, w.id, b.id}, fwd, bwd);
}

Var conv3d(Var x, Var w) {
  Tape& t = *same_tape(x, w, "conv3d");
  auto fwd = [xi = x.id, wi = w.id](Tape& t, int self) {
    conv3d_forward(t.node(xi).value, t.node(wi).value, nullptr, t.node(self).value);
  };
  auto bwd = [xi = x.id, wi = w.id](Tape& t, int self) {
    const Tensor& g = t.node(self).grad;
    if (t.node(xi).requires_grad)
      conv3d_backward_input(g, t.node(wi).value, t.grad_buffer(xi));
    if (t.node(wi).requires_grad)
      conv3d_backward_params(g, t.node(xi).value, t.grad_buffer(wi), nullptr);
  };
  return t.make_node({}, {x.id, w.id}, fwd, bwd);
}

// ---- average pooling ----------------------------------------------------------------

namespace {

// 3-tap box sums along each axis with zero padding, scaled by 1/27.
void box3(const Tensor& in, Tensor& out) {
  require(in.rank() == 4, "avg_pool3: input must be [C,Z,Y,X], shape is ",
          in.shape_str());
  const std::int64_t cn = in.dim(0), zn = in.dim(1), yn = in.dim(2), xn = in.dim(3);
  const std::int64_t plane = zn * yn * xn;
  out = Tensor(in.shape());
  std::vector<double> t1(static_cast<std::size_t>(plane)), t2(static_cast<std::size_t>(plane));
  for (std::int64_t c = 0; c < cn; ++c) {
    const double* src = in.data() + c * plane;
    // x pass
    for (std::int64_t zy = 0; zy < zn * yn; ++zy) {
      const double* r = src + zy * xn;
      double* o = t1.data() + zy * xn;
      for (std::int64_t x = 0; x < xn; ++x) {
        double s = r[x];
        if (x > 0) s += r[x - 1];
        if (x + 1 < xn) s += r[x + 1];
        o[x] = s;
      }
    }
    // y pass
    for (std::int64_t z = 0; z < zn; ++z)
      for (std::int64_t y = 0; y < yn; ++y) {
        const double* mid = t1.data() + (z * yn + y) * xn;
        const double* up = y > 0 ? t1.data() + (z * yn + y - 1) * xn : nullptr;
        const double* dn = y + 1 < yn ? t1.data() + (z * yn + y + 1) * xn : nullptr;
        double* o = t2.data() + (z * yn + y) * xn;
        for (std::int64_t x = 0; x < xn; ++x)
          o[x] = mid[x] + (up ? up[x] : 0.0) + (dn ? dn[x] : 0.0);
      }
    // z pass
    double* dst = out.data() + c * plane;
    for (std::int64_t z = 0; z < zn; ++z)
      for (std::int64_t y = 0; y < yn; ++y) {
        const double* mid = t2.data() + (z * yn + y) * xn;
        const double* up = z > 0 ? t2.data() + ((z - 1) * yn + y) * xn : nullptr;
        const double* dn = z + 1 < zn ? t2.data() + ((z + 1) * yn + y) * xn : nullptr;
        double* o = dst + (z * yn + y) * xn;
        for (std::int64_t x = 0; x < xn; ++x)
          o[x] = (mid[x] + (up ? up[x] : 0.0) + (dn ? dn[x] : 0.0)) / 27.0;
      }
  }
}

}  // namespace

Var avg_pool3(Var a) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id](Tape& t, int self) {
    box3(t.node(ai).value, t.node(self).value);
  };
  auto bwd = [ai = a.id](Tape& t, int self) {
    if (!t.node(ai).requires_grad) return;
    Tensor gg;
    box3(t.node(self).grad, gg);  // the box filter is self-adjoint
    Tensor& dst = t.grad_buffer(ai);
    for (std::int64_t i = 0; i < dst.count(); ++i) dst[i] += gg[i];
  };
  return t.make_node({}, {a.id}, fwd, bwd);
}

Var detach(Var a) {
  Tape& t = *a.tape;
  auto fwd = [ai = a.id](Tape& t, int self) {
    t.node(self).value = t.node(ai).value;
  };
  return t.make_node({}, {a.id}, fwd, nullptr);
}

// ---- finite-difference checking --------------------------------------------------

GradCheckReport grad_check(Tape& tape, Var output, double step, double tol) {
  require(output.tape == &tape, "grad_check: output from another tape");
  require(tape.value(output).count() == 1, "grad_check needs a scalar output");
  require(step > 0.0 && tol > 0.0, "grad_check: step and tol must be positive");

  const double f0 = tape.value(output)[0];
  tape.replay();
  double f1 = tape.value(output)[0];
  tape.replay();
  double f2 = tape.value(output)[0];
  require(std::memcmp(&f0, &f1, sizeof(double)) == 0 &&
              std::memcmp(&f0, &f2, sizeof(double)) == 0,
          "grad_check: forward pass is not deterministic (", f0, " vs ", f1, " vs ",
          f2, ")");

  tape.backward(output);

  GradCheckReport report;
  report.pass = true;
  for (Var p : tape.trainable_params()) {
    Tensor g_ad = tape.grad(p);  // copy: replays below clear nothing, but be safe
    Tensor& value = const_cast<Tensor&>(tape.value(p));
    for (std::int64_t i = 0; i < value.count(); ++i) {
      const double old = value[i];
      value[i] = old + step;
      tape.replay();
      const double fp = tape.value(output)[0];
      value[i] = old - step;
      tape.replay();
      const double fm = tape.value(output)[0];
      value[i] = old;
      const double g_fd = (fp - fm) / (2.0 * step);
      const double rel =
          std::abs(g_ad[i] - g_fd) / (std::abs(g_ad[i]) + std::abs(g_fd) + 1e-12);
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = tape.node(p.id).name;
        report.worst_index = i;
        report.ad_value = g_ad[i];
        report.fd_value = g_fd;
      }
    }
  }
  tape.replay();  // restore consistent forward state
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace mriqc
