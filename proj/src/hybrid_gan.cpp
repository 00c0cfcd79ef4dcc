#include "qmgen/hybrid_gan.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace qmgen::gan {

using nn::Activation;
using nn::ParamRegistry;
using nn::Tape;
using nn::Tensor;

namespace {

constexpr int kCriticHidden1 = 64;
constexpr int kCriticHidden2 = 32;
constexpr int kAggregateOut = 128;
constexpr double kFdInf = 1e30;

void check_range(int v, int lo, int hi, const char* what) {
  if (v < lo || v > hi) {
    std::ostringstream os;
    os << what << " = " << v << " outside [" << lo << ", " << hi << "]";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

void ArchitectureConfig::validate() const {
  check_range(q_width, 4, 16, "q_width");
  check_range(q_depth, 1, 4, "q_depth");
  check_range(c_width, 16, 512, "c_width");
  check_range(c_depth, 1, 4, "c_depth");
}

ArchitectureConfig ArchitectureConfig::parse(const std::string& csv) {
  ArchitectureConfig arch;
  std::istringstream is(csv);
  char comma;
  if (!(is >> arch.q_width >> comma >> arch.q_depth >> comma >> arch.c_width >> comma >>
        arch.c_depth)) {
    throw std::invalid_argument("architecture must be 'q_width,q_depth,c_width,c_depth', got '" +
                                csv + "'");
  }
  arch.validate();
  return arch;
}

std::string ArchitectureConfig::to_string() const {
  std::ostringstream os;
  os << q_width << ',' << q_depth << ',' << c_width << ',' << c_depth;
  return os.str();
}

ParamCounts count_parameters(const ArchitectureConfig& arch, const GraphSpec& spec) {
  const long w = arch.c_width;
  const long m = arch.q_width;
  const long adj_dim = static_cast<long>(spec.n_max) * spec.n_max * spec.n_bond_types;
  const long feat_dim = static_cast<long>(spec.n_max) * spec.n_atom_types;
  ParamCounts out;
  out.quantum = static_cast<long>(arch.q_width) * arch.q_depth;
  out.classical = (m * w + w) + (arch.c_depth - 1) * (w * w + w) + (w * adj_dim + adj_dim) +
                  (w * feat_dim + feat_dim);
  out.total = out.quantum + out.classical;
  return out;
}

void TrainConfig::validate() const {
  if (lambda_mix < 0.0 || lambda_mix > 1.0) {
    throw std::invalid_argument("lambda must lie in [0,1]");
  }
  if (batch_size < 1 || max_iterations < 1 || critic_steps < 1 || eval_interval < 1 ||
      eval_samples < 1 || patience < 1) {
    throw std::invalid_argument("train config counts must be positive");
  }
}

GeneratorModel GeneratorModel::init(const ArchitectureConfig& arch, const GraphSpec& spec,
                                    Rng& rng) {
  arch.validate();
  GeneratorModel model;
  model.arch = arch;
  model.graph_spec = spec;
  model.circuit_spec = CircuitSpec(arch.q_width, arch.q_depth);
  model.circuit_params = Tensor::zeros({model.circuit_spec.param_count()});
  // near-identity start keeps early expectations away from flat regions
  for (double& v : model.circuit_params.data) v = rng.uniform(-0.1, 0.1);

  model.trunk.push_back(nn::DenseLayer::init(arch.q_width, arch.c_width, Activation::Tanh, rng));
  for (int k = 1; k < arch.c_depth; ++k) {
    model.trunk.push_back(nn::DenseLayer::init(arch.c_width, arch.c_width, Activation::Tanh, rng));
  }
  const int adj_dim = spec.n_max * spec.n_max * spec.n_bond_types;
  const int feat_dim = spec.n_max * spec.n_atom_types;
  model.head_adj = nn::DenseLayer::init(arch.c_width, adj_dim, Activation::None, rng);
  model.head_feat = nn::DenseLayer::init(arch.c_width, feat_dim, Activation::None, rng);
  return model;
}

GeneratorModel::Out GeneratorModel::forward(Tape& tape, ParamRegistry* reg, const Tensor& z,
                                            double temperature, Rng& noise_rng, bool hard,
                                            const QuantumBackend& backend) const {
  ParamRegistry local(false);
  ParamRegistry& r = reg != nullptr ? *reg : local;
  const int batch = z.dim(0);
  const int n = graph_spec.n_max;
  const int t = graph_spec.n_atom_types;
  const int y = graph_spec.n_bond_types;

  int params_id = r.bind(tape, const_cast<Tensor&>(circuit_params));
  int h = tape.quantum_bridge(params_id, z, circuit_spec, backend);
  for (const auto& layer : trunk) {
    h = layer.forward(tape, r, h);
  }
  int adj_logits = head_adj.forward(tape, r, h);
  int feat_logits = head_feat.forward(tape, r, h);

  int adj4 = tape.reshape(adj_logits, {batch, n, n, y});
  int adj_sym = tape.sym_axes12(adj4);
  // the noise must be symmetric across (i,j)/(j,i) or the sampled fibers
  // would break the adjacency symmetry invariant
  Tensor adj_noise = Tensor::zeros({batch, n, n, y});
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        for (int c = 0; c < y; ++c) {
          double gn = noise_rng.gumbel();
          adj_noise.data[((static_cast<std::size_t>(b) * n + i) * n + j) * y + c] = gn;
          adj_noise.data[((static_cast<std::size_t>(b) * n + j) * n + i) * y + c] = gn;
        }
      }
    }
  }
  int adj_probs = nn::gumbel_softmax(tape, adj_sym, temperature, noise_rng, hard, &adj_noise);
  int feat2 = tape.reshape(feat_logits, {batch, n, t});
  int feat_probs = nn::gumbel_softmax(tape, feat2, temperature, noise_rng, hard);
  return Out{feat_probs, adj_probs};
}

std::vector<Tensor*> GeneratorModel::parameters() {
  std::vector<Tensor*> out{&circuit_params};
  for (auto& l : trunk) {
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  out.push_back(&head_adj.weights);
  out.push_back(&head_adj.bias);
  out.push_back(&head_feat.weights);
  out.push_back(&head_feat.bias);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> GeneratorModel::named_parameters(
    const std::string& prefix) {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back(prefix + ".circuit_params", &circuit_params);
  for (std::size_t i = 0; i < trunk.size(); ++i) {
    out.emplace_back(prefix + ".trunk." + std::to_string(i) + ".weights", &trunk[i].weights);
    out.emplace_back(prefix + ".trunk." + std::to_string(i) + ".bias", &trunk[i].bias);
  }
  out.emplace_back(prefix + ".head_adj.weights", &head_adj.weights);
  out.emplace_back(prefix + ".head_adj.bias", &head_adj.bias);
  out.emplace_back(prefix + ".head_feat.weights", &head_feat.weights);
  out.emplace_back(prefix + ".head_feat.bias", &head_feat.bias);
  return out;
}

GraphNet GraphNet::init(const GraphSpec& spec, bool sigmoid_head, Rng& rng) {
  GraphNet net;
  net.conv1 = nn::RgcnLayer::init(spec.n_atom_types, kCriticHidden1, spec.n_bond_types,
                                  Activation::Tanh, rng);
  net.conv2 =
      nn::RgcnLayer::init(kCriticHidden1, kCriticHidden2, spec.n_bond_types, Activation::Tanh,
                          rng);
  net.agg = nn::GraphAggregate::init(kCriticHidden2, kAggregateOut, rng);
  net.head = nn::DenseLayer::init(kAggregateOut, 1, Activation::None, rng);
  net.sigmoid_head = sigmoid_head;
  return net;
}

int GraphNet::forward(Tape& tape, ParamRegistry* reg, int features, int adjacency) const {
  ParamRegistry local(false);
  ParamRegistry& r = reg != nullptr ? *reg : local;
  int h = conv1.forward(tape, r, features, adjacency);
  h = conv2.forward(tape, r, h, adjacency);
  int pooled = agg.forward(tape, r, h);
  int out = head.forward(tape, r, pooled);
  return sigmoid_head ? tape.sigmoid_op(out) : out;
}

std::vector<Tensor*> GraphNet::parameters() {
  std::vector<Tensor*> out{&conv1.w_self, &conv1.bias};
  for (auto& w : conv1.w_rel) out.push_back(&w);
  out.push_back(&conv2.w_self);
  out.push_back(&conv2.bias);
  for (auto& w : conv2.w_rel) out.push_back(&w);
  out.push_back(&agg.w_gate);
  out.push_back(&agg.b_gate);
  out.push_back(&agg.w_val);
  out.push_back(&agg.b_val);
  out.push_back(&head.weights);
  out.push_back(&head.bias);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> GraphNet::named_parameters(
    const std::string& prefix) {
  std::vector<std::pair<std::string, Tensor*>> out;
  auto conv = [&](const std::string& name, nn::RgcnLayer& layer) {
    out.emplace_back(prefix + "." + name + ".w_self", &layer.w_self);
    for (std::size_t i = 0; i < layer.w_rel.size(); ++i) {
      out.emplace_back(prefix + "." + name + ".w_rel." + std::to_string(i), &layer.w_rel[i]);
    }
    out.emplace_back(prefix + "." + name + ".bias", &layer.bias);
  };
  conv("conv1", conv1);
  conv("conv2", conv2);
  out.emplace_back(prefix + ".agg.w_gate", &agg.w_gate);
  out.emplace_back(prefix + ".agg.b_gate", &agg.b_gate);
  out.emplace_back(prefix + ".agg.w_val", &agg.w_val);
  out.emplace_back(prefix + ".agg.b_val", &agg.b_val);
  out.emplace_back(prefix + ".head.weights", &head.weights);
  out.emplace_back(prefix + ".head.bias", &head.bias);
  return out;
}

HybridGan HybridGan::init(const ArchitectureConfig& arch, const GraphSpec& spec,
                          std::uint64_t seed) {
  Rng master(seed);
  Rng gen_rng = master.split(1);
  Rng critic_rng = master.split(2);
  Rng reward_rng = master.split(3);
  HybridGan gan;
  gan.generator = GeneratorModel::init(arch, spec, gen_rng);
  gan.critic = GraphNet::init(spec, false, critic_rng);
  gan.reward = GraphNet::init(spec, true, reward_rng);
  gan.backend = std::make_shared<StatevectorBackend>();
  return gan;
}

std::vector<std::pair<std::string, Tensor*>> HybridGan::named_parameters() {
  auto out = generator.named_parameters("generator");
  auto c = critic.named_parameters("critic");
  auto r = reward.named_parameters("reward");
  out.insert(out.end(), c.begin(), c.end());
  out.insert(out.end(), r.begin(), r.end());
  return out;
}

DenseGraphBatch generate(const HybridGan& model, const Tensor& z, double temperature,
                         Rng& noise_rng, bool hard) {
  Tape tape;
  auto out = model.generator.forward(tape, nullptr, z, temperature, noise_rng, hard,
                                     *model.backend);
  const GraphSpec& spec = model.generator.graph_spec;
  DenseGraphBatch batch(z.dim(0), spec);
  batch.features = tape.value(out.features).data;
  batch.adjacency = tape.value(out.adjacency).data;
  return batch;
}

std::vector<double> critic_score(const GraphNet& critic, const DenseGraphBatch& batch) {
  Tape tape;
  int f = tape.constant(Tensor({batch.batch, batch.n, batch.t}, batch.features));
  int a = tape.constant(Tensor({batch.batch, batch.n, batch.n, batch.y}, batch.adjacency));
  int out = critic.forward(tape, nullptr, f, a);
  return tape.value(out).data;
}

int gradient_penalty(Tape& tape, const std::function<int(Tape&, int, int)>& critic_fn,
                     const Tensor& mixed_features, const Tensor& mixed_adjacency) {
  int xf = tape.leaf(mixed_features, true);
  int xa = tape.leaf(mixed_adjacency, true);
  int out = critic_fn(tape, xf, xa);
  auto grads = tape.gradients(tape.sum_all(out), {xf, xa});
  int sq = tape.add(tape.sum_per_sample(tape.square(grads[0])),
                    tape.sum_per_sample(tape.square(grads[1])));
  int norm = tape.sqrt_eps(sq, 1e-12);
  return tape.mean_all(tape.square(tape.affine(norm, 1.0, -1.0)));
}

bool EarlyStopper::observe(long iteration, double fd, double dcs) {
  if (!threshold_met_ && fd < fd_threshold_) {
    threshold_met_ = true;
    anchor_ = iteration;
  }
  if (dcs > best_dcs_) {
    best_dcs_ = dcs;
    if (threshold_met_) anchor_ = iteration;
  }
  return threshold_met_ && iteration - anchor_ >= patience_;
}

namespace {

// --- training internals ---------------------------------------------------

struct RealBatch {
  Tensor features;
  Tensor adjacency;
  std::vector<double> reward_targets;  // per-sample DCS/10
};

struct EncodedDataset {
  std::vector<std::vector<double>> features;
  std::vector<std::vector<double>> adjacency;
  std::vector<double> reward_targets;
  GraphSpec spec;
};

EncodedDataset encode_dataset(const Dataset& ds, const ScoringContext& scoring,
                              const GraphSpec& spec) {
  EncodedDataset out;
  out.spec = spec;
  out.features.reserve(ds.size());
  out.adjacency.reserve(ds.size());
  for (const auto& mol : ds.molecules) {
    DenseGraphBatch enc = encode(mol, spec);
    out.features.push_back(std::move(enc.features));
    out.adjacency.push_back(std::move(enc.adjacency));
    out.reward_targets.push_back(score_molecule(mol, scoring).dcs / 10.0);
  }
  return out;
}

RealBatch sample_real_batch(const EncodedDataset& enc, int batch, Rng& rng) {
  const GraphSpec& spec = enc.spec;
  RealBatch out;
  out.features = Tensor::zeros({batch, spec.n_max, spec.n_atom_types});
  out.adjacency = Tensor::zeros({batch, spec.n_max, spec.n_max, spec.n_bond_types});
  const int fstride = spec.n_max * spec.n_atom_types;
  const int astride = spec.n_max * spec.n_max * spec.n_bond_types;
  for (int b = 0; b < batch; ++b) {
    int idx = rng.uniform_int(0, static_cast<int>(enc.features.size()) - 1);
    std::copy(enc.features[static_cast<std::size_t>(idx)].begin(),
              enc.features[static_cast<std::size_t>(idx)].end(),
              out.features.data.begin() + static_cast<std::ptrdiff_t>(b) * fstride);
    std::copy(enc.adjacency[static_cast<std::size_t>(idx)].begin(),
              enc.adjacency[static_cast<std::size_t>(idx)].end(),
              out.adjacency.data.begin() + static_cast<std::ptrdiff_t>(b) * astride);
    out.reward_targets.push_back(enc.reward_targets[static_cast<std::size_t>(idx)]);
  }
  return out;
}

Tensor sample_z(int batch, int m, Rng& rng) {
  Tensor z = Tensor::zeros({batch, m});
  for (double& v : z.data) v = rng.uniform();
  return z;
}

Tensor mix_batches(const Tensor& real, const Tensor& fake, const std::vector<double>& eps) {
  Tensor out = real;
  const int batch = real.dim(0);
  const int stride = real.numel() / batch;
  for (int b = 0; b < batch; ++b) {
    const double e = eps[static_cast<std::size_t>(b)];
    for (int i = 0; i < stride; ++i) {
      std::size_t k = static_cast<std::size_t>(b) * stride + i;
      out.data[k] = e * real.data[k] + (1.0 - e) * fake.data[k];
    }
  }
  return out;
}

int mse_against(Tape& tape, int pred, const std::vector<double>& targets) {
  const int batch = tape.value(pred).dim(0);
  if (static_cast<std::size_t>(batch) != targets.size()) {
    throw nn::ShapeMismatch("reward target count does not match batch");
  }
  int target = tape.constant(Tensor({batch, 1}, std::vector<double>(targets)));
  int diff = tape.sub(pred, target);
  return tape.mean_all(tape.square(diff));
}

class Trainer {
 public:
  Trainer(const Dataset& dataset, const ArchitectureConfig& arch, const TrainConfig& cfg)
      : cfg_(cfg),
        scoring_(dataset),
        gan_(HybridGan::init(arch, GraphSpec::qm9(), cfg.seed)),
        master_(cfg.seed),
        data_rng_(master_.split(11)),
        z_rng_(master_.split(12)),
        noise_rng_(master_.split(13)),
        mix_rng_(master_.split(14)),
        eval_rng_(master_.split(15)),
        eval_noise_rng_(master_.split(16)),
        stopper_(cfg.fd_threshold, cfg.patience) {
    cfg_.validate();
    gan_.backend->threads = cfg_.threads;
    encoded_ = encode_dataset(dataset, scoring_, gan_.generator.graph_spec);
    const std::size_t val_n =
        std::min<std::size_t>(static_cast<std::size_t>(cfg_.validation_size), dataset.size());
    validation_.name = "validation";
    validation_.molecules.assign(dataset.molecules.begin(),
                                 dataset.molecules.begin() + static_cast<std::ptrdiff_t>(val_n));
  }

  TrainResult run() {
    auto started = std::chrono::steady_clock::now();
    TrainingTrace trace;
    double g_loss = 0.0, c_loss = 0.0, r_loss = 0.0;
    trace.records.push_back(evaluate(0, g_loss, c_loss, r_loss, started));
    long iter = 0;
    std::string reason = "max_iterations";
    while (iter < cfg_.max_iterations) {
      ++iter;
      for (int k = 0; k < cfg_.critic_steps; ++k) {
        c_loss = critic_update();
      }
      auto [gl, fake] = generator_update();
      g_loss = gl;
      r_loss = reward_update(fake);
      iteration_ = iter;
      if (iter % cfg_.eval_interval == 0 || iter == cfg_.max_iterations) {
        EvalRecord rec = evaluate(iter, g_loss, c_loss, r_loss, started);
        trace.records.push_back(rec);
        if (stopper_.observe(iter, rec.fd, rec.dcs_mean)) {
          reason = "early_stop";
          break;
        }
      }
    }
    trace.stop_iteration = iter;
    trace.stop_reason = reason;
    return TrainResult{std::move(gan_), std::move(trace)};
  }

 private:
  double apply_update(Tape& tape, ParamRegistry& reg, int loss, const char* what) {
    const double loss_value = tape.value(loss).data[0];
    if (!std::isfinite(loss_value)) {
      throw NonFiniteLoss(std::string(what) + " loss went non-finite at iteration " +
                          std::to_string(iteration_));
    }
    std::vector<int> wrt;
    for (const auto& [param, id] : reg.entries()) wrt.push_back(id);
    auto grad_ids = tape.gradients(loss, wrt);
    std::vector<Tensor> grads;
    grads.reserve(grad_ids.size());
    for (int gid : grad_ids) {
      grads.push_back(tape.value(gid));
      if (!grads.back().finite()) {
        throw NonFiniteLoss(std::string(what) + " gradient went non-finite at iteration " +
                            std::to_string(iteration_));
      }
    }
    std::vector<Tensor*> ptrs;
    for (auto& g : grads) ptrs.push_back(&g);
    nn::clip_grad_norm(ptrs, cfg_.clip_norm);
    const double factor = cfg_.schedule.factor(iteration_);
    const auto& entries = reg.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      nn::adam_step(*entries[i].first, grads[i], adam_states_[entries[i].first], cfg_.adam,
                    factor);
    }
    return loss_value;
  }

  double critic_update() {
    Tape tape;
    ParamRegistry reg_c(true);
    RealBatch real = sample_real_batch(encoded_, cfg_.batch_size, data_rng_);
    Tensor z = sample_z(cfg_.batch_size, gan_.generator.arch.q_width, z_rng_);
    auto fake = gan_.generator.forward(tape, nullptr, z, cfg_.temperature, noise_rng_, false,
                                       *gan_.backend);

    std::vector<double> eps(static_cast<std::size_t>(cfg_.batch_size));
    for (double& e : eps) e = mix_rng_.uniform();
    Tensor mixed_f = mix_batches(real.features, tape.value(fake.features), eps);
    Tensor mixed_a = mix_batches(real.adjacency, tape.value(fake.adjacency), eps);

    int c_fake = gan_.critic.forward(tape, &reg_c, fake.features, fake.adjacency);
    int c_real = gan_.critic.forward(tape, &reg_c, tape.constant(real.features),
                                     tape.constant(real.adjacency));
    int gp = gradient_penalty(
        tape,
        [&](Tape& t, int f, int a) { return gan_.critic.forward(t, &reg_c, f, a); }, mixed_f,
        mixed_a);
    int loss = tape.add(tape.sub(tape.mean_all(c_fake), tape.mean_all(c_real)),
                        tape.affine(gp, cfg_.gp_weight, 0.0));
    return apply_update(tape, reg_c, loss, "critic");
  }

  std::pair<double, DenseGraphBatch> generator_update() {
    Tape tape;
    ParamRegistry reg_g(true);
    Tensor z = sample_z(cfg_.batch_size, gan_.generator.arch.q_width, z_rng_);
    auto fake = gan_.generator.forward(tape, &reg_g, z, cfg_.temperature, noise_rng_, false,
                                       *gan_.backend);
    int loss;
    if (cfg_.lambda_mix >= 1.0) {
      loss = tape.neg(tape.mean_all(gan_.critic.forward(tape, nullptr, fake.features,
                                                        fake.adjacency)));
    } else if (cfg_.lambda_mix <= 0.0) {
      loss = tape.neg(tape.mean_all(gan_.reward.forward(tape, nullptr, fake.features,
                                                        fake.adjacency)));
    } else {
      int adv = tape.neg(tape.mean_all(gan_.critic.forward(tape, nullptr, fake.features,
                                                           fake.adjacency)));
      int val = tape.neg(tape.mean_all(gan_.reward.forward(tape, nullptr, fake.features,
                                                           fake.adjacency)));
      loss = tape.add(tape.affine(adv, cfg_.lambda_mix, 0.0),
                      tape.affine(val, 1.0 - cfg_.lambda_mix, 0.0));
    }
    double loss_value = apply_update(tape, reg_g, loss, "generator");

    const GraphSpec& spec = gan_.generator.graph_spec;
    DenseGraphBatch batch(cfg_.batch_size, spec);
    batch.features = tape.value(fake.features).data;
    batch.adjacency = tape.value(fake.adjacency).data;
    return {loss_value, std::move(batch)};
  }

  double reward_update(const DenseGraphBatch& fake) {
    Tape tape;
    ParamRegistry reg_r(true);
    RealBatch real = sample_real_batch(encoded_, cfg_.batch_size, data_rng_);

    std::vector<double> fake_targets;
    for (const auto& g : discretize(fake)) {
      fake_targets.push_back(score_molecule(g, scoring_).dcs / 10.0);
    }
    int r_real = gan_.reward.forward(tape, &reg_r, tape.constant(real.features),
                                     tape.constant(real.adjacency));
    int r_fake = gan_.reward.forward(
        tape, &reg_r,
        tape.constant(Tensor({fake.batch, fake.n, fake.t}, fake.features)),
        tape.constant(Tensor({fake.batch, fake.n, fake.n, fake.y}, fake.adjacency)));
    int loss = tape.affine(tape.add(mse_against(tape, r_real, real.reward_targets),
                                    mse_against(tape, r_fake, fake_targets)),
                           0.5, 0.0);
    return apply_update(tape, reg_r, loss, "reward");
  }

  EvalRecord evaluate(long iter, double g_loss, double c_loss, double r_loss,
                      std::chrono::steady_clock::time_point started) {
    Tensor z = sample_z(cfg_.eval_samples, gan_.generator.arch.q_width, eval_rng_);
    DenseGraphBatch batch = generate(gan_, z, cfg_.temperature, eval_noise_rng_, false);
    if (!batch.check_invariants(1e-6)) {
      throw NonFiniteLoss("generated batch broke the simplex/symmetry invariants at iteration " +
                          std::to_string(iter));
    }
    auto graphs = discretize(batch);
    Dataset valid_gen;
    valid_gen.name = "generated";
    double dcs_sum = 0.0;
    for (const auto& g : graphs) {
      auto s = score_molecule(g, scoring_);
      dcs_sum += s.dcs;
      if (s.valid) valid_gen.molecules.push_back(g);
    }
    EvalRecord rec;
    rec.iteration = iter;
    rec.dcs_mean = dcs_sum / static_cast<double>(graphs.size());
    rec.validity = static_cast<double>(valid_gen.size()) / static_cast<double>(graphs.size());
    rec.fd = valid_gen.empty() ? kFdInf : frechet_distance(valid_gen, validation_);
    rec.g_loss = g_loss;
    rec.c_loss = c_loss;
    rec.r_loss = r_loss;
    rec.lr = cfg_.adam.lr * cfg_.schedule.factor(iter);
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rec;
  }

  TrainConfig cfg_;
  ScoringContext scoring_;
  HybridGan gan_;
  Rng master_;
  Rng data_rng_;
  Rng z_rng_;
  Rng noise_rng_;
  Rng mix_rng_;
  Rng eval_rng_;
  Rng eval_noise_rng_;
  EarlyStopper stopper_;
  EncodedDataset encoded_;
  Dataset validation_;
  std::map<const Tensor*, nn::AdamState> adam_states_;
  long iteration_ = 0;
};

}  // namespace

LossValues compute_losses(HybridGan& model, const Tensor& real_features,
                          const Tensor& real_adjacency,
                          const std::vector<double>& real_reward_targets, const Tensor& z,
                          const TrainConfig& cfg, Rng& noise_rng, Rng& mix_rng,
                          const ScoringContext& scoring) {
  LossValues out;
  const int batch = z.dim(0);

  Tape tape;
  ParamRegistry reg_c(true);
  auto fake = model.generator.forward(tape, nullptr, z, cfg.temperature, noise_rng, false,
                                      *model.backend);
  std::vector<double> eps(static_cast<std::size_t>(batch));
  for (double& e : eps) e = mix_rng.uniform();
  Tensor mixed_f = mix_batches(real_features, tape.value(fake.features), eps);
  Tensor mixed_a = mix_batches(real_adjacency, tape.value(fake.adjacency), eps);
  int c_fake = model.critic.forward(tape, &reg_c, fake.features, fake.adjacency);
  int c_real = model.critic.forward(tape, &reg_c, tape.constant(real_features),
                                    tape.constant(real_adjacency));
  int gp = gradient_penalty(
      tape, [&](Tape& t, int f, int a) { return model.critic.forward(t, &reg_c, f, a); },
      mixed_f, mixed_a);
  out.gp_term = tape.value(gp).data[0];
  int c_loss = tape.add(tape.sub(tape.mean_all(c_fake), tape.mean_all(c_real)),
                        tape.affine(gp, cfg.gp_weight, 0.0));
  out.critic_loss = tape.value(c_loss).data[0];

  int adv = tape.neg(tape.mean_all(c_fake));
  int val = tape.neg(
      tape.mean_all(model.reward.forward(tape, nullptr, fake.features, fake.adjacency)));
  out.generator_adv = tape.value(adv).data[0];
  out.generator_value = tape.value(val).data[0];
  out.generator_loss =
      cfg.lambda_mix * out.generator_adv + (1.0 - cfg.lambda_mix) * out.generator_value;

  const GraphSpec& spec = model.generator.graph_spec;
  DenseGraphBatch fb(batch, spec);
  fb.features = tape.value(fake.features).data;
  fb.adjacency = tape.value(fake.adjacency).data;
  std::vector<double> fake_targets;
  for (const auto& g : discretize(fb)) {
    fake_targets.push_back(score_molecule(g, scoring).dcs / 10.0);
  }
  int r_real = model.reward.forward(tape, nullptr, tape.constant(real_features),
                                    tape.constant(real_adjacency));
  int r_fake = model.reward.forward(tape, nullptr, fake.features, fake.adjacency);
  int r_loss = tape.affine(tape.add(mse_against(tape, r_real, real_reward_targets),
                                    mse_against(tape, r_fake, fake_targets)),
                           0.5, 0.0);
  out.reward_loss = tape.value(r_loss).data[0];
  return out;
}

TrainResult train(const Dataset& dataset, const ArchitectureConfig& arch,
                  const TrainConfig& cfg) {
  if (dataset.empty()) {
    throw EmptyDataset("training needs a non-empty dataset");
  }
  Trainer trainer(dataset, arch, cfg);
  return trainer.run();
}

void save_checkpoint(const std::string& path, HybridGan& model) {
  nlohmann::json j;
  j["version"] = "ckpt-v1";
  j["arch"] = {{"q_width", model.generator.arch.q_width},
               {"q_depth", model.generator.arch.q_depth},
               {"c_width", model.generator.arch.c_width},
               {"c_depth", model.generator.arch.c_depth}};
  nlohmann::json layers = nlohmann::json::object();
  for (auto& [name, tensor] : model.named_parameters()) {
    layers[name] = {{"shape", tensor->shape}, {"data", tensor->data}};
  }
  j["layers"] = std::move(layers);
  std::ofstream out(path);
  if (!out) {
    throw BadCheckpoint("cannot write checkpoint: " + path);
  }
  out << j.dump();
}

HybridGan load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw BadCheckpoint("cannot open checkpoint: " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw BadCheckpoint(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.contains("version") || j["version"] != "ckpt-v1") {
    throw BadCheckpoint("unsupported checkpoint version");
  }
  ArchitectureConfig arch;
  try {
    arch.q_width = j.at("arch").at("q_width").get<int>();
    arch.q_depth = j.at("arch").at("q_depth").get<int>();
    arch.c_width = j.at("arch").at("c_width").get<int>();
    arch.c_depth = j.at("arch").at("c_depth").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw BadCheckpoint(std::string("checkpoint architecture block is malformed: ") + e.what());
  }
  HybridGan model = HybridGan::init(arch, GraphSpec::qm9(), 0);
  const auto& layers = j.at("layers");
  for (auto& [name, tensor] : model.named_parameters()) {
    if (!layers.contains(name)) {
      throw BadCheckpoint("checkpoint is missing tensor: " + name);
    }
    auto shape = layers.at(name).at("shape").get<std::vector<int>>();
    auto data = layers.at(name).at("data").get<std::vector<double>>();
    if (shape != tensor->shape || data.size() != tensor->data.size()) {
      throw BadCheckpoint("checkpoint tensor shape mismatch for " + name);
    }
    tensor->data = std::move(data);
  }
  return model;
}

}  // namespace qmgen::gan
