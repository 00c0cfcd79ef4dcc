#include "qmgen/qcircuit.hpp"

#include <cmath>
#include <thread>

namespace qmgen {

namespace {

constexpr double kPi = 3.14159265358979323846;

void apply_ry(StateVector& state, int qubit, double theta) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  const std::size_t mask = std::size_t{1} << qubit;
  const std::size_t dim = state.amplitudes.size();
  for (std::size_t b = 0; b < dim; ++b) {
    if (b & mask) continue;
    auto& a0 = state.amplitudes[b];
    auto& a1 = state.amplitudes[b | mask];
    const auto t0 = a0;
    a0 = c * t0 - s * a1;
    a1 = s * t0 + c * a1;
  }
}

void apply_cnot(StateVector& state, int control, int target) {
  const std::size_t cmask = std::size_t{1} << control;
  const std::size_t tmask = std::size_t{1} << target;
  const std::size_t dim = state.amplitudes.size();
  for (std::size_t b = 0; b < dim; ++b) {
    if ((b & cmask) && !(b & tmask)) {
      std::swap(state.amplitudes[b], state.amplitudes[b | tmask]);
    }
  }
}

void apply_ring(StateVector& state, int qubits) {
  if (qubits < 2) return;
  if (qubits == 2) {
    apply_cnot(state, 0, 1);  // a full ring would cancel itself pairwise
    return;
  }
  for (int i = 0; i < qubits; ++i) {
    apply_cnot(state, i, (i + 1) % qubits);
  }
}

void apply_rotation_layer(StateVector& state, const CircuitSpec& spec,
                          const CircuitParams& params, int layer, int shifted_qubit = -1,
                          double shift = 0.0) {
  for (int q = 0; q < spec.qubits; ++q) {
    double theta = params.angles[static_cast<std::size_t>(layer * spec.qubits + q)];
    if (q == shifted_qubit) theta += shift;
    apply_ry(state, q, theta);
  }
}

}  // namespace

CircuitSpec::CircuitSpec(int qubits_, int layers_) : qubits(qubits_), layers(layers_) {
  if (qubits < 1 || qubits > 24) {
    throw DimensionMismatch("qubit count out of simulable range: " + std::to_string(qubits));
  }
  if (layers < 1) {
    throw DimensionMismatch("layer count must be positive");
  }
}

StateVector StateVector::zero_state(int qubits) {
  StateVector s;
  s.qubits = qubits;
  s.amplitudes.assign(std::size_t{1} << qubits, {0.0, 0.0});
  s.amplitudes[0] = {1.0, 0.0};
  return s;
}

double StateVector::norm() const {
  double n = 0.0;
  for (const auto& a : amplitudes) n += std::norm(a);
  return std::sqrt(n);
}

StateVector encode_input(std::span<const double> z) {
  const int qubits = static_cast<int>(z.size());
  if (qubits < 1) {
    throw DimensionMismatch("encode_input needs at least one coordinate");
  }
  for (double v : z) {
    if (!std::isfinite(v)) {
      throw DimensionMismatch("encode_input requires finite z");
    }
  }
  StateVector state = StateVector::zero_state(qubits);
  for (int q = 0; q < qubits; ++q) {
    apply_ry(state, q, z[static_cast<std::size_t>(q)] * kPi);
  }
  return state;
}

StateVector apply_variational(StateVector state, const CircuitSpec& spec,
                              const CircuitParams& params) {
  if (state.qubits != spec.qubits) {
    throw DimensionMismatch("state width does not match circuit spec");
  }
  if (static_cast<int>(params.angles.size()) != spec.param_count()) {
    throw DimensionMismatch("parameter count does not match circuit spec");
  }
  for (int layer = 0; layer < spec.layers; ++layer) {
    apply_rotation_layer(state, spec, params, layer);
    apply_ring(state, spec.qubits);
  }
  return state;
}

std::vector<double> expectations_z(const StateVector& state) {
  std::vector<double> out(static_cast<std::size_t>(state.qubits), 0.0);
  const std::size_t dim = state.amplitudes.size();
  for (std::size_t b = 0; b < dim; ++b) {
    const double p = std::norm(state.amplitudes[b]);
    if (p == 0.0) continue;
    for (int q = 0; q < state.qubits; ++q) {
      out[static_cast<std::size_t>(q)] += (b >> q) & 1 ? -p : p;
    }
  }
  return out;
}

std::vector<double> forward(std::span<const double> z, const CircuitSpec& spec,
                            const CircuitParams& params) {
  if (static_cast<int>(z.size()) != spec.qubits) {
    throw DimensionMismatch("z width does not match circuit spec");
  }
  return expectations_z(apply_variational(encode_input(z), spec, params));
}

std::vector<double> grad_params(std::span<const double> z, const CircuitSpec& spec,
                                const CircuitParams& params,
                                std::span<const double> upstream) {
  if (static_cast<int>(z.size()) != spec.qubits) {
    throw DimensionMismatch("z width does not match circuit spec");
  }
  if (static_cast<int>(upstream.size()) != spec.qubits) {
    throw DimensionMismatch("upstream width does not match circuit spec");
  }
  if (static_cast<int>(params.angles.size()) != spec.param_count()) {
    throw DimensionMismatch("parameter count does not match circuit spec");
  }

  // Cache the state entering each layer so a shifted evaluation only
  // replays the circuit suffix.
  std::vector<StateVector> prefix;
  prefix.reserve(static_cast<std::size_t>(spec.layers));
  StateVector state = encode_input(z);
  for (int layer = 0; layer < spec.layers; ++layer) {
    prefix.push_back(state);
    apply_rotation_layer(state, spec, params, layer);
    apply_ring(state, spec.qubits);
  }

  auto shifted_expectations = [&](int layer, int qubit, double shift) {
    StateVector s = prefix[static_cast<std::size_t>(layer)];
    apply_rotation_layer(s, spec, params, layer, qubit, shift);
    apply_ring(s, spec.qubits);
    for (int l = layer + 1; l < spec.layers; ++l) {
      apply_rotation_layer(s, spec, params, l);
      apply_ring(s, spec.qubits);
    }
    return expectations_z(s);
  };

  std::vector<double> grad(static_cast<std::size_t>(spec.param_count()), 0.0);
  for (int layer = 0; layer < spec.layers; ++layer) {
    for (int qubit = 0; qubit < spec.qubits; ++qubit) {
      auto plus = shifted_expectations(layer, qubit, kPi / 2.0);
      auto minus = shifted_expectations(layer, qubit, -kPi / 2.0);
      double g = 0.0;
      for (int i = 0; i < spec.qubits; ++i) {
        g += upstream[static_cast<std::size_t>(i)] * 0.5 *
             (plus[static_cast<std::size_t>(i)] - minus[static_cast<std::size_t>(i)]);
      }
      grad[static_cast<std::size_t>(layer * spec.qubits + qubit)] = g;
    }
  }
  return grad;
}

std::vector<double> QuantumBackend::forward_batch(std::span<const double> z_batch, int batch,
                                                  const CircuitSpec& spec,
                                                  const CircuitParams& params) const {
  const int m = spec.qubits;
  std::vector<double> out(static_cast<std::size_t>(batch) * m, 0.0);
  auto run_range = [&](int lo, int hi) {
    for (int b = lo; b < hi; ++b) {
      auto row = forward(z_batch.subspan(static_cast<std::size_t>(b) * m, m), spec, params);
      std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(b) * m);
    }
  };
  int workers = std::min(threads, batch);
  if (workers <= 1) {
    run_range(0, batch);
    return out;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    int lo = batch * w / workers;
    int hi = batch * (w + 1) / workers;
    pool.emplace_back(run_range, lo, hi);
  }
  for (auto& th : pool) th.join();
  return out;
}

std::vector<double> QuantumBackend::grad_batch(std::span<const double> z_batch, int batch,
                                               const CircuitSpec& spec,
                                               const CircuitParams& params,
                                               std::span<const double> upstream_batch) const {
  const int m = spec.qubits;
  std::vector<std::vector<double>> per_sample(static_cast<std::size_t>(batch));
  auto run_range = [&](int lo, int hi) {
    for (int b = lo; b < hi; ++b) {
      per_sample[static_cast<std::size_t>(b)] =
          grad_params(z_batch.subspan(static_cast<std::size_t>(b) * m, m), spec, params,
                      upstream_batch.subspan(static_cast<std::size_t>(b) * m, m));
    }
  };
  int workers = std::min(threads, batch);
  if (workers <= 1) {
    run_range(0, batch);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      int lo = batch * w / workers;
      int hi = batch * (w + 1) / workers;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  // deterministic gather: sum in sample order
  std::vector<double> grad(static_cast<std::size_t>(spec.param_count()), 0.0);
  for (int b = 0; b < batch; ++b) {
    const auto& g = per_sample[static_cast<std::size_t>(b)];
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g[k];
  }
  return grad;
}

std::vector<double> StatevectorBackend::forward(std::span<const double> z,
                                                const CircuitSpec& spec,
                                                const CircuitParams& params) const {
  return qmgen::forward(z, spec, params);
}

std::vector<double> StatevectorBackend::grad_params(std::span<const double> z,
                                                    const CircuitSpec& spec,
                                                    const CircuitParams& params,
                                                    std::span<const double> upstream) const {
  return qmgen::grad_params(z, spec, params, upstream);
}

}  // namespace qmgen
