#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "mriqc/tensor.hpp"

namespace mriqc {

class Tape;

// Handle to a node on a tape. Cheap to copy; only meaningful together with
// the tape that produced it.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

// Reverse-mode autodiff tape. Nodes record a forward closure (so the tape
// can be replayed after leaf values change) and a backward closure that
// scatters the node's gradient into its inputs. A tape is single-owner
// during forward/backward; independent tapes may run in parallel.
class Tape {
public:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    std::vector<int> inputs;
    bool requires_grad = false;
    bool trainable = false;  // trainable leaf (parameter)
    bool leaf = false;
    std::string name;
    std::function<void(Tape&, int)> fwd;  // recompute value from inputs
    std::function<void(Tape&, int)> bwd;  // scatter grad into inputs
  };

  Var constant(Tensor t);
  Var param(Tensor t, std::string name, bool trainable = true);

  const Tensor& value(Var v) const { return node(v.id).value; }
  const Tensor& grad(Var v);
  void set_value(Var v, Tensor t);  // leaves only

  // Exact reverse-mode gradients of a scalar output.
  void backward(Var output);

  // Recomputes every non-leaf node in recording order.
  void replay();

  std::vector<Var> trainable_params();
  int size() const { return int(nodes_.size()); }

  Node& node(int id) {
    require(id >= 0 && id < size(), "invalid tape node id ", id);
    return nodes_[id];
  }
  const Node& node(int id) const {
    require(id >= 0 && id < size(), "invalid tape node id ", id);
    return nodes_[id];
  }

  Var make_node(Tensor value, std::vector<int> inputs,
                std::function<void(Tape&, int)> fwd,
                std::function<void(Tape&, int)> bwd);

  // Adds g into the gradient buffer of node id (allocating it if needed).
  Tensor& grad_buffer(int id);

private:
  // deque: node references stay valid while new nodes are recorded
  std::deque<Node> nodes_;
};

// ---- primitives ---------------------------------------------------------
// Binary elementwise ops accept equal shapes, or a single-element tensor on
// either side (scalar broadcast). No other broadcasting exists.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_scalar(Var a, double c);
Var mul_scalar(Var a, double c);
Var neg(Var a);
Var exp(Var a);
Var log(Var a);         // rejects non-positive inputs
Var reciprocal(Var a);
Var abs(Var a);
Var maximum(Var a, Var b);  // ties route gradient to a
Var relu(Var a);
Var softplus(Var a);

Var sum(Var a);         // -> scalar
Var mean(Var a);        // -> scalar
Var reduce_max(Var a);  // -> scalar; gradient to the first argmax

// Copies [start, start+len) along the given axis.
Var slice(Var a, int axis, std::int64_t start, std::int64_t len);

// [1, rest...] -> [c, rest...] and back.
Var tile_channel(Var a, std::int64_t c);
Var sum_channel(Var a);

// Channel axis is axis 0. Both are shift-stabilized internally.
Var softmax_channel(Var a);
Var log_softmax_channel(Var a);

// Stride-1 3D convolution with odd kernel dims and zero padding.
// x: [IC, Z, Y, X], w: [OC, IC, KZ, KY, KX], optional bias [OC].
Var conv3d(Var x, Var w, Var b);
Var conv3d(Var x, Var w);

// 3x3x3 uniform average with zero padding, per channel.
Var avg_pool3(Var a);

// Value copy that blocks gradient flow.
Var detach(Var a);

// Test hook: elementwise op with caller-supplied value/derivative.
Var custom_unary(Var a, std::function<double(double)> f,
                 std::function<double(double)> df);

// Operator sugar.
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }
inline Var operator*(Var a, double c) { return mul_scalar(a, c); }
inline Var operator*(double c, Var a) { return mul_scalar(a, c); }
inline Var operator-(Var a) { return neg(a); }

// ---- gradient checking ----------------------------------------------------

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::string worst_param;
  std::int64_t worst_index = -1;
  double ad_value = 0.0;
  double fd_value = 0.0;
  std::int64_t checked = 0;
};

// Central finite differences of the tape's scalar output with respect to
// every trainable parameter, against the reverse-mode gradients. Rejects
// non-deterministic graphs (two replays that disagree bit-for-bit).
GradCheckReport grad_check(Tape& tape, Var output, double step = 1e-5,
                           double tol = 1e-4);

// ---- raw kernels (shared with inference paths) ------------------------------

void conv3d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, Tensor& out);
void conv3d_backward_input(const Tensor& g_out, const Tensor& w, Tensor& g_x);
void conv3d_backward_params(const Tensor& g_out, const Tensor& x, Tensor& g_w,
                            Tensor* g_b);
void relu_forward(const Tensor& x, Tensor& out);

}  // namespace mriqc
