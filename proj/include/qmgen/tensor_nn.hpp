#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmgen/qcircuit.hpp"
#include "qmgen/rng.hpp"

namespace qmgen::nn {

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonPositiveTemperature : std::runtime_error {
  explicit NonPositiveTemperature(const std::string& msg) : std::runtime_error(msg) {}
};

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> shape_, std::vector<double> data_);

  static Tensor zeros(const std::vector<int>& shape);
  static Tensor full(const std::vector<int>& shape, double v);
  static Tensor scalar(double v) { return full({1}, v); }

  int numel() const;
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }
  bool finite() const;
};

// Reverse-mode tape. Values are computed eagerly at node creation; the
// backward pass composes new tape nodes for the gradients, so an
// expression built from a gradient (the WGAN gradient penalty) can be
// differentiated again by a second backward sweep.
class Tape {
 public:
  int leaf(Tensor value, bool requires_grad = false);
  int constant(Tensor value) { return leaf(std::move(value), false); }

  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int affine(int a, double scale, double shift);
  int neg(int a) { return affine(a, -1.0, 0.0); }
  int square(int a) { return mul(a, a); }

  int matmul(int a, int b);         // (m,k) x (k,n)
  int bmm(int a, int b);            // (B,m,k) x (B,k,n)
  int transpose2d(int a);
  int transpose_last2(int a);       // 3D
  int reshape(int a, std::vector<int> shape);

  int tanh_op(int a);
  int sigmoid_op(int a);
  int reciprocal(int a);
  int sqrt_eps(int a, double eps = 1e-12);
  int softmax_lastdim(int a);

  int add_bias(int a, int bias);    // bias spans the last dim
  int sum_all(int a);               // -> {1}
  int mean_all(int a);
  int bcast_scalar(int a, std::vector<int> shape);
  int sum_lastdim(int a);           // (...,K) -> (...)
  int bcast_lastdim(int a, int k);  // (...) -> (...,K)
  int mul_bcast_last(int a, int s); // (...,K) * (...)
  int sum_axis1(int a);             // (B,N,F) -> (B,F)
  int bcast_axis1(int a, int n);    // (B,F) -> (B,N,F)
  int sum_axis0(int a);             // (R,C) -> (C)
  int bcast_axis0(int a, int r);    // (C) -> (R,C)
  int sum_per_sample(int a);        // (B,...) -> (B)
  int bcast_per_sample(int a, std::vector<int> rest);  // (B) -> (B,rest...)
  int slice_channel_last(int a, int c);
  int pad_channel_last(int a, int c, int channels);
  int sym_axes12(int a);            // (B,N,N,C) -> symmetrized over axes 1,2
  int straight_through_onehot(int a);

  // (B*N, F) x (F, G) convenience over reshape+matmul for stacked dims.
  int matmul_lastdim(int a, int w);

  // Quantum generator stage: value from the backend's batched forward,
  // gradient via the parameter-shift rule. Opaque to double backward.
  int quantum_bridge(int params_leaf, Tensor z_batch, const CircuitSpec& spec,
                     const QuantumBackend& backend);

  // d(root)/d(each of wrt) as node ids (zeros node when disconnected).
  // root must be scalar.
  std::vector<int> gradients(int root, const std::vector<int>& wrt);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs; }
  std::size_t size() const { return nodes_.size(); }

 private:
  // vjp returns per-parent gradient contributions (-1 when a parent needs
  // nothing); invoked with the upstream gradient node id.
  using Vjp = std::function<std::vector<int>(Tape&, int self, int grad)>;

  struct Node {
    Tensor value;
    bool needs = false;
    std::vector<int> parents;
    Vjp vjp;
  };

  int push(Tensor value, std::vector<int> parents, Vjp vjp);
  std::vector<Node> nodes_;
};

enum class Activation { None, Tanh };

// Per-step binding of persistent parameter tensors to tape leaves; the
// same tensor always binds to the same leaf within a step. A frozen
// registry binds constants: gradients flow through the network but are
// not collected for its parameters.
class ParamRegistry {
 public:
  explicit ParamRegistry(bool trainable = true) : trainable_(trainable) {}

  int bind(Tape& tape, Tensor& param);
  const std::vector<std::pair<Tensor*, int>>& entries() const { return entries_; }

 private:
  bool trainable_;
  std::vector<std::pair<Tensor*, int>> entries_;
  std::map<const Tensor*, int> index_;
};

struct DenseLayer {
  Tensor weights;  // (fan_in, fan_out)
  Tensor bias;     // (fan_out)
  Activation act = Activation::None;

  static DenseLayer init(int fan_in, int fan_out, Activation act, Rng& rng);
  int forward(Tape& tape, ParamRegistry& reg, int input) const;
  int param_count() const { return weights.numel() + bias.numel(); }
};

// Relational graph convolution: h' = act(h W_self + sum_y A^_y h W_y + b)
// with A^_y row-normalized by 1/(1 + total in-degree); bond channel 0
// ("none") carries no messages.
struct RgcnLayer {
  Tensor w_self;
  std::vector<Tensor> w_rel;  // one per real bond type
  Tensor bias;
  Activation act = Activation::Tanh;

  static RgcnLayer init(int fan_in, int fan_out, int bond_channels, Activation act, Rng& rng);
  int forward(Tape& tape, ParamRegistry& reg, int features, int adjacency) const;
  int param_count() const;
};

// Gated permutation-invariant readout: sum_i sigmoid(lin1 h_i) * tanh(lin2 h_i).
struct GraphAggregate {
  Tensor w_gate, b_gate;
  Tensor w_val, b_val;

  static GraphAggregate init(int fan_in, int fan_out, Rng& rng);
  int forward(Tape& tape, ParamRegistry& reg, int node_feats) const;
  int param_count() const;
};

// softmax((logits + gumbel)/tau) over the last dim; `hard` swaps in a
// one-hot forward with a straight-through backward. Tests can inject the
// noise tensor; training samples it from the rng.
int gumbel_softmax(Tape& tape, int logits, double temperature, Rng& rng, bool hard,
                   const Tensor* injected_noise = nullptr);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor first_moment;
  Tensor second_moment;
  long step_count = 0;
};

// Bias-corrected Adam update, scaled by the schedule factor.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg,
               double lr_factor = 1.0);

// Scale the gradient set so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_grad_norm(std::vector<Tensor*> grads, double max_norm = 1.0);

struct LrSchedule {
  long warmup_steps = 200;
  long constant_steps = 2000;
  double decay_rate = 0.9995;

  // Linear 0->1 over warmup, flat 1, then decay_rate^(steps past constant).
  double factor(long step) const;
};

}  // namespace qmgen::nn
