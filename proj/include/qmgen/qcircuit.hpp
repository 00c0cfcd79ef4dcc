#pragma once

#include <complex>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmgen {

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

// Width/depth of the RY + CNOT-ring circuit family. The architecture
// search constrains qubits to [4,16] and layers to [1,4]; the simulator
// itself accepts any small width so single-qubit cases stay testable.
struct CircuitSpec {
  int qubits = 4;
  int layers = 1;

  CircuitSpec() = default;
  CircuitSpec(int qubits_, int layers_);

  int param_count() const { return qubits * layers; }
};

// Rotation angles in radians, layer-major: angles[layer * qubits + qubit].
struct CircuitParams {
  std::vector<double> angles;

  static CircuitParams zeros(const CircuitSpec& spec) {
    return CircuitParams{std::vector<double>(static_cast<std::size_t>(spec.param_count()), 0.0)};
  }
  double& at(const CircuitSpec& spec, int layer, int qubit) {
    return angles[static_cast<std::size_t>(layer * spec.qubits + qubit)];
  }
};

struct StateVector {
  int qubits = 0;
  std::vector<std::complex<double>> amplitudes;

  static StateVector zero_state(int qubits);
  double norm() const;
};

// |psi> = prod_i RY(z_i * pi) |0...0>; angle encoding of one noise row.
StateVector encode_input(std::span<const double> z);

// Per layer: RY(theta_{l,i}) on every qubit, then the CNOT ring
// i -> (i+1) mod M. The ring degenerates to a single CNOT(0->1) for M=2
// and to nothing for M=1.
StateVector apply_variational(StateVector state, const CircuitSpec& spec,
                              const CircuitParams& params);

// <Z_i> for every qubit; bit i of a basis index holds qubit i's value.
std::vector<double> expectations_z(const StateVector& state);

// expectations_z(apply_variational(encode_input(z))).
std::vector<double> forward(std::span<const double> z, const CircuitSpec& spec,
                            const CircuitParams& params);

// Parameter-shift gradient: d<Z_i>/dtheta_k = (<Z_i>(+pi/2) - <Z_i>(-pi/2)) / 2,
// contracted with the upstream cotangent. Exact for RY generators.
std::vector<double> grad_params(std::span<const double> z, const CircuitSpec& spec,
                                const CircuitParams& params,
                                std::span<const double> upstream);

inline int count_quantum_params(const CircuitSpec& spec) { return spec.param_count(); }

// Contract between the generator and whatever executes its circuits; a
// remote-QPU client would implement the same surface. Only the exact
// statevector simulator is provided here.
class QuantumBackend {
 public:
  virtual ~QuantumBackend() = default;

  virtual std::vector<double> forward(std::span<const double> z, const CircuitSpec& spec,
                                      const CircuitParams& params) const = 0;
  virtual std::vector<double> grad_params(std::span<const double> z, const CircuitSpec& spec,
                                          const CircuitParams& params,
                                          std::span<const double> upstream) const = 0;

  // Batched entry points; rows of `z_batch` are independent samples.
  // Implementations may fan out across threads but must gather rows in
  // index order so results are deterministic.
  std::vector<double> forward_batch(std::span<const double> z_batch, int batch,
                                    const CircuitSpec& spec, const CircuitParams& params) const;
  std::vector<double> grad_batch(std::span<const double> z_batch, int batch,
                                 const CircuitSpec& spec, const CircuitParams& params,
                                 std::span<const double> upstream_batch) const;

  int threads = 1;
};

class StatevectorBackend final : public QuantumBackend {
 public:
  std::vector<double> forward(std::span<const double> z, const CircuitSpec& spec,
                              const CircuitParams& params) const override;
  std::vector<double> grad_params(std::span<const double> z, const CircuitSpec& spec,
                                  const CircuitParams& params,
                                  std::span<const double> upstream) const override;
};

}  // namespace qmgen
