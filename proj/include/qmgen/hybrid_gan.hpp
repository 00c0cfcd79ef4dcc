#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qmgen/chemprops.hpp"
#include "qmgen/molgraph.hpp"
#include "qmgen/qcircuit.hpp"
#include "qmgen/rng.hpp"
#include "qmgen/smiles.hpp"
#include "qmgen/tensor_nn.hpp"

namespace qmgen::gan {

struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& msg) : std::runtime_error(msg) {}
};

struct BadCheckpoint : std::runtime_error {
  explicit BadCheckpoint(const std::string& msg) : std::runtime_error(msg) {}
};

// Search-space bounds for the bridge architecture: quantum width [4,16],
// quantum depth [1,4], classical width [16,512], classical depth [1,4].
struct ArchitectureConfig {
  int q_width = 7;
  int q_depth = 3;
  int c_width = 227;
  int c_depth = 2;

  void validate() const;
  static ArchitectureConfig parse(const std::string& csv);  // "7,3,227,2"
  std::string to_string() const;
};

struct ParamCounts {
  long quantum = 0;
  long classical = 0;
  long total = 0;
};

// Generator-only counting convention: bridge dense (M->w), (c_depth-1)
// trunk layers (w->w), and the two output heads (w -> N*N*Y, w -> N*T),
// biases included. Quantum count is M*L.
ParamCounts count_parameters(const ArchitectureConfig& arch,
                             const GraphSpec& spec = GraphSpec::qm9());

struct TrainConfig {
  double lambda_mix = 0.5;  // weight on the adversarial term
  int batch_size = 16;
  int max_iterations = 600;
  double fd_threshold = 12.5;
  int patience = 250;  // iterations without DCS improvement once FD < threshold
  int critic_steps = 5;
  double gp_weight = 10.0;
  int eval_interval = 20;
  int eval_samples = 64;
  int validation_size = 256;
  double temperature = 1.0;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  int threads = 1;
  nn::AdamConfig adam;       // lr 1e-4, the paper's setting
  nn::LrSchedule schedule;   // warmup/constant/decay

  void validate() const;
};

// Quantum stage plus the classical decoder: trunk of tanh dense layers
// and two logit heads that reshape to the dense graph tensors.
struct GeneratorModel {
  ArchitectureConfig arch;
  GraphSpec graph_spec;
  CircuitSpec circuit_spec;
  nn::Tensor circuit_params;             // (M*L), layer-major angles
  std::vector<nn::DenseLayer> trunk;     // M->w, then (c_depth-1) x w->w
  nn::DenseLayer head_adj;               // w -> N*N*Y
  nn::DenseLayer head_feat;              // w -> N*T

  static GeneratorModel init(const ArchitectureConfig& arch, const GraphSpec& spec, Rng& rng);

  struct Out {
    int features;   // (B,N,T) simplex rows
    int adjacency;  // (B,N,N,Y) symmetric simplex fibers
  };
  // Builds the generator on the tape: quantum bridge, classical stack,
  // symmetrized adjacency logits, Gumbel-Softmax sampling.
  Out forward(nn::Tape& tape, nn::ParamRegistry* reg, const nn::Tensor& z, double temperature,
              Rng& noise_rng, bool hard, const QuantumBackend& backend) const;

  std::vector<nn::Tensor*> parameters();
  std::vector<std::pair<std::string, nn::Tensor*>> named_parameters(const std::string& prefix);
};

// Critic and reward share this shape: two relational graph convolutions,
// gated aggregation, dense head. The reward head is squashed to [0,1].
struct GraphNet {
  nn::RgcnLayer conv1;
  nn::RgcnLayer conv2;
  nn::GraphAggregate agg;
  nn::DenseLayer head;
  bool sigmoid_head = false;

  static GraphNet init(const GraphSpec& spec, bool sigmoid_head, Rng& rng);
  int forward(nn::Tape& tape, nn::ParamRegistry* reg, int features, int adjacency) const;
  std::vector<nn::Tensor*> parameters();
  std::vector<std::pair<std::string, nn::Tensor*>> named_parameters(const std::string& prefix);
};

struct HybridGan {
  GeneratorModel generator;
  GraphNet critic;
  GraphNet reward;
  std::shared_ptr<QuantumBackend> backend;

  static HybridGan init(const ArchitectureConfig& arch, const GraphSpec& spec,
                        std::uint64_t seed);
  std::vector<std::pair<std::string, nn::Tensor*>> named_parameters();
};

// Inference-time generation: B rows of z ~ U(0,1)^M, then the generator
// forward pass; `hard` produces one-hot tensors via straight-through.
DenseGraphBatch generate(const HybridGan& model, const nn::Tensor& z, double temperature,
                         Rng& noise_rng, bool hard = false);

// Critic scores for a dense batch, one per sample.
std::vector<double> critic_score(const GraphNet& critic, const DenseGraphBatch& batch);

// Scalar gradient-penalty node: mean((||d critic/d inputs||_2 - 1)^2)
// over the given (already interpolated) inputs. critic_fn maps
// (tape, features, adjacency) -> (B,1) scores.
int gradient_penalty(nn::Tape& tape,
                     const std::function<int(nn::Tape&, int, int)>& critic_fn,
                     const nn::Tensor& mixed_features, const nn::Tensor& mixed_adjacency);

struct LossValues {
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double reward_loss = 0.0;
  double generator_adv = 0.0;
  double generator_value = 0.0;
  double gp_term = 0.0;
};

// One-shot loss evaluation on a fixed batch (no updates); exercised by
// tests and mirrors exactly what the training loop optimizes.
LossValues compute_losses(HybridGan& model, const nn::Tensor& real_features,
                          const nn::Tensor& real_adjacency,
                          const std::vector<double>& real_reward_targets, const nn::Tensor& z,
                          const TrainConfig& cfg, Rng& noise_rng, Rng& mix_rng,
                          const ScoringContext& scoring);

// Stop once FD has dipped below the threshold and DCS has not improved
// for `patience` iterations.
class EarlyStopper {
 public:
  EarlyStopper(double fd_threshold, long patience)
      : fd_threshold_(fd_threshold), patience_(patience) {}

  bool observe(long iteration, double fd, double dcs);
  bool threshold_met() const { return threshold_met_; }

 private:
  double fd_threshold_;
  long patience_;
  bool threshold_met_ = false;
  long anchor_ = 0;
  double best_dcs_ = -1e300;
};

struct EvalRecord {
  long iteration = 0;
  double fd = 0.0;
  double dcs_mean = 0.0;
  double validity = 0.0;
  double g_loss = 0.0;
  double c_loss = 0.0;
  double r_loss = 0.0;
  double lr = 0.0;
  double wall_s = 0.0;
};

struct TrainingTrace {
  std::vector<EvalRecord> records;
  long stop_iteration = 0;
  std::string stop_reason;
};

struct TrainResult {
  HybridGan model;
  TrainingTrace trace;
};

// Full adversarial training run on the dataset. Deterministic given
// cfg.seed (wall_s timing fields aside). Throws NonFiniteLoss when a
// loss or gradient goes non-finite.
TrainResult train(const Dataset& dataset, const ArchitectureConfig& arch,
                  const TrainConfig& cfg);

// ckpt-v1 checkpoints: JSON mapping parameter names to shape + flat data.
void save_checkpoint(const std::string& path, HybridGan& model);
HybridGan load_checkpoint(const std::string& path);

}  // namespace qmgen::gan
