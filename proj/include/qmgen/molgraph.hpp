#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qmgen {

// Atom-type channel order is fixed: [C, O, N, F, H, Pad]. The H channel
// exists for encoding parity (T = 6); parsed molecules never contain
// explicit H, but discretized generator output may, so the rest of the
// pipeline tolerates it (valence 1, fallback property contributions).
enum class AtomType : std::uint8_t { C = 0, O = 1, N = 2, F = 3, H = 4, Pad = 5 };

enum class BondType : std::uint8_t {
  None = 0,
  Single = 1,
  Double = 2,
  Triple = 3,
  Aromatic = 4,
};

const char* atom_symbol(AtomType t);

// Bond order in half-units (single=2, double=4, triple=6, aromatic=3).
int bond_half_order(BondType t);

// Maximum valence in half-units (C:8, N:6, O:4, F:2, H:2).
int max_half_valence(AtomType t);

struct CapacityExceeded : std::runtime_error {
  explicit CapacityExceeded(const std::string& msg) : std::runtime_error(msg) {}
};

struct GraphSpec {
  int n_max = 9;        // atom slots (N)
  int n_atom_types = 6; // T: C, O, N, F, H, padding
  int n_bond_types = 5; // Y: none, single, double, triple, aromatic

  static GraphSpec qm9() { return GraphSpec{}; }
};

// Heavy-atom molecular graph. Atoms are stored compactly (no padding
// entries); padding appears only in the dense encoding. Bonds are kept
// in a sorted map keyed by (i, j) with i < j, so iteration order is
// deterministic.
class MolecularGraph {
 public:
  MolecularGraph() = default;

  int add_atom(AtomType t);
  void add_bond(int i, int j, BondType t);

  int size() const { return static_cast<int>(atoms_.size()); }
  AtomType atom(int i) const { return atoms_.at(static_cast<std::size_t>(i)); }
  const std::vector<AtomType>& atoms() const { return atoms_; }

  BondType bond(int i, int j) const;
  const std::map<std::pair<int, int>, BondType>& bonds() const { return bonds_; }

  int degree(int i) const;
  std::vector<std::pair<int, BondType>> neighbors(int i) const;

  bool operator==(const MolecularGraph& other) const = default;

 private:
  std::vector<AtomType> atoms_;
  std::map<std::pair<int, int>, BondType> bonds_;
};

// Continuous batched graph tensors: features (B,N,T) row-simplex,
// adjacency (B,N,N,Y) symmetric with simplex fibers over Y.
struct DenseGraphBatch {
  int batch = 0;
  int n = 0;
  int t = 0;
  int y = 0;
  std::vector<double> features;  // batch*n*t, row-major
  std::vector<double> adjacency; // batch*n*n*y, row-major

  DenseGraphBatch() = default;
  DenseGraphBatch(int batch_, const GraphSpec& spec);

  double& feat(int b, int i, int c);
  double feat(int b, int i, int c) const;
  double& adj(int b, int i, int j, int c);
  double adj(int b, int i, int j, int c) const;

  // Row simplexes within tol, adjacency symmetric within tol.
  bool check_invariants(double tol = 1e-6) const;
};

// Encode a graph into one-hot feature/adjacency tensors (batch size 1).
// Slots beyond the atom count are one-hot on the padding channel; absent
// bonds are one-hot on "none". Throws CapacityExceeded when the graph
// has more atoms than spec.n_max.
DenseGraphBatch encode(const MolecularGraph& graph, const GraphSpec& spec);

// Argmax decode of a dense batch. Ties break toward the lowest channel
// index. Bond fibers are averaged over (i,j)/(j,i) before the argmax so
// the result never depends on which triangle is read. Bonds incident to
// padding slots are dropped.
std::vector<MolecularGraph> discretize(const DenseGraphBatch& batch);

// Valence check: at least one non-padding atom, and every atom's bond
// order sum stays within its max valence (aromatic counts 1.5, allowed
// only when the atom has at least two aromatic bonds). Remaining valence
// is implicit hydrogen. Connectivity is not required.
bool check_validity(const MolecularGraph& graph);

// Heavy-atom count (explicit H excluded) plus a histogram over the four
// real bond types [single, double, triple, aromatic].
std::pair<int, std::array<int, 4>> count_atoms_bonds(const MolecularGraph& graph);

// Implicit hydrogen count for atom i: spare valence rounded down, never
// negative. Used by property and SMILES modules.
int implicit_hydrogens(const MolecularGraph& graph, int i);

}  // namespace qmgen
