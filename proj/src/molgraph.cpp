#include "qmgen/molgraph.hpp"

#include <algorithm>
#include <cmath>

namespace qmgen {

const char* atom_symbol(AtomType t) {
  switch (t) {
    case AtomType::C: return "C";
    case AtomType::O: return "O";
    case AtomType::N: return "N";
    case AtomType::F: return "F";
    case AtomType::H: return "H";
    case AtomType::Pad: return "*";
  }
  return "?";
}

int bond_half_order(BondType t) {
  switch (t) {
    case BondType::None: return 0;
    case BondType::Single: return 2;
    case BondType::Double: return 4;
    case BondType::Triple: return 6;
    case BondType::Aromatic: return 3;
  }
  return 0;
}

int max_half_valence(AtomType t) {
  switch (t) {
    case AtomType::C: return 8;
    case AtomType::N: return 6;
    case AtomType::O: return 4;
    case AtomType::F: return 2;
    case AtomType::H: return 2;
    case AtomType::Pad: return 0;
  }
  return 0;
}

int MolecularGraph::add_atom(AtomType t) {
  if (t == AtomType::Pad) {
    throw std::invalid_argument("padding is not a real atom");
  }
  atoms_.push_back(t);
  return static_cast<int>(atoms_.size()) - 1;
}

void MolecularGraph::add_bond(int i, int j, BondType t) {
  if (i == j) {
    throw std::invalid_argument("self-bond");
  }
  if (i < 0 || j < 0 || i >= size() || j >= size()) {
    throw std::out_of_range("bond endpoint out of range");
  }
  if (t == BondType::None) {
    return;
  }
  auto key = std::minmax(i, j);
  bonds_[{key.first, key.second}] = t;
}

BondType MolecularGraph::bond(int i, int j) const {
  auto key = std::minmax(i, j);
  auto it = bonds_.find({key.first, key.second});
  return it == bonds_.end() ? BondType::None : it->second;
}

int MolecularGraph::degree(int i) const {
  int d = 0;
  for (const auto& [key, type] : bonds_) {
    if (key.first == i || key.second == i) ++d;
  }
  return d;
}

std::vector<std::pair<int, BondType>> MolecularGraph::neighbors(int i) const {
  std::vector<std::pair<int, BondType>> out;
  for (const auto& [key, type] : bonds_) {
    if (key.first == i) out.emplace_back(key.second, type);
    else if (key.second == i) out.emplace_back(key.first, type);
  }
  return out;
}

DenseGraphBatch::DenseGraphBatch(int batch_, const GraphSpec& spec)
    : batch(batch_), n(spec.n_max), t(spec.n_atom_types), y(spec.n_bond_types),
      features(static_cast<std::size_t>(batch_) * spec.n_max * spec.n_atom_types, 0.0),
      adjacency(static_cast<std::size_t>(batch_) * spec.n_max * spec.n_max * spec.n_bond_types,
                0.0) {}

double& DenseGraphBatch::feat(int b, int i, int c) {
  return features[(static_cast<std::size_t>(b) * n + i) * t + c];
}
double DenseGraphBatch::feat(int b, int i, int c) const {
  return features[(static_cast<std::size_t>(b) * n + i) * t + c];
}
double& DenseGraphBatch::adj(int b, int i, int j, int c) {
  return adjacency[((static_cast<std::size_t>(b) * n + i) * n + j) * y + c];
}
double DenseGraphBatch::adj(int b, int i, int j, int c) const {
  return adjacency[((static_cast<std::size_t>(b) * n + i) * n + j) * y + c];
}

bool DenseGraphBatch::check_invariants(double tol) const {
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int c = 0; c < t; ++c) {
        double v = feat(b, i, c);
        if (v < -tol || !std::isfinite(v)) return false;
        row += v;
      }
      if (std::abs(row - 1.0) > tol) return false;
      for (int j = 0; j < n; ++j) {
        double fiber = 0.0;
        for (int c = 0; c < y; ++c) {
          double v = adj(b, i, j, c);
          if (v < -tol || !std::isfinite(v)) return false;
          if (std::abs(v - adj(b, j, i, c)) > tol) return false;
          fiber += v;
        }
        if (std::abs(fiber - 1.0) > tol) return false;
      }
    }
  }
  return true;
}

DenseGraphBatch encode(const MolecularGraph& graph, const GraphSpec& spec) {
  if (graph.size() > spec.n_max) {
    throw CapacityExceeded("graph has " + std::to_string(graph.size()) + " atoms, capacity " +
                           std::to_string(spec.n_max));
  }
  DenseGraphBatch out(1, spec);
  for (int i = 0; i < spec.n_max; ++i) {
    int channel = i < graph.size() ? static_cast<int>(graph.atom(i))
                                   : static_cast<int>(AtomType::Pad);
    out.feat(0, i, channel) = 1.0;
  }
  for (int i = 0; i < spec.n_max; ++i) {
    for (int j = 0; j < spec.n_max; ++j) {
      int channel = static_cast<int>(BondType::None);
      if (i != j && i < graph.size() && j < graph.size()) {
        channel = static_cast<int>(graph.bond(i, j));
      }
      out.adj(0, i, j, channel) = 1.0;
    }
  }
  return out;
}

std::vector<MolecularGraph> discretize(const DenseGraphBatch& batch) {
  std::vector<MolecularGraph> out;
  out.reserve(static_cast<std::size_t>(batch.batch));
  const int pad = static_cast<int>(AtomType::Pad);
  for (int b = 0; b < batch.batch; ++b) {
    MolecularGraph g;
    std::vector<int> slot_to_atom(static_cast<std::size_t>(batch.n), -1);
    for (int i = 0; i < batch.n; ++i) {
      int best = 0;
      for (int c = 1; c < batch.t; ++c) {
        if (batch.feat(b, i, c) > batch.feat(b, i, best)) best = c;
      }
      if (best != pad) {
        slot_to_atom[static_cast<std::size_t>(i)] = g.add_atom(static_cast<AtomType>(best));
      }
    }
    for (int i = 0; i < batch.n; ++i) {
      for (int j = i + 1; j < batch.n; ++j) {
        int ai = slot_to_atom[static_cast<std::size_t>(i)];
        int aj = slot_to_atom[static_cast<std::size_t>(j)];
        if (ai < 0 || aj < 0) continue;
        int best = 0;
        double best_v = 0.5 * (batch.adj(b, i, j, 0) + batch.adj(b, j, i, 0));
        for (int c = 1; c < batch.y; ++c) {
          double v = 0.5 * (batch.adj(b, i, j, c) + batch.adj(b, j, i, c));
          if (v > best_v) {
            best_v = v;
            best = c;
          }
        }
        if (best != static_cast<int>(BondType::None)) {
          g.add_bond(ai, aj, static_cast<BondType>(best));
        }
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

bool check_validity(const MolecularGraph& graph) {
  if (graph.size() == 0) return false;
  for (int i = 0; i < graph.size(); ++i) {
    int half_sum = 0;
    int aromatic_count = 0;
    for (const auto& [j, type] : graph.neighbors(i)) {
      half_sum += bond_half_order(type);
      if (type == BondType::Aromatic) ++aromatic_count;
    }
    if (aromatic_count == 1) return false;
    if (half_sum > max_half_valence(graph.atom(i))) return false;
  }
  return true;
}

std::pair<int, std::array<int, 4>> count_atoms_bonds(const MolecularGraph& graph) {
  int heavy = 0;
  for (AtomType t : graph.atoms()) {
    if (t != AtomType::H) ++heavy;
  }
  std::array<int, 4> hist{0, 0, 0, 0};
  for (const auto& [key, type] : graph.bonds()) {
    hist[static_cast<std::size_t>(static_cast<int>(type) - 1)] += 1;
  }
  return {heavy, hist};
}

int implicit_hydrogens(const MolecularGraph& graph, int i) {
  int half_sum = 0;
  for (const auto& [j, type] : graph.neighbors(i)) {
    half_sum += bond_half_order(type);
  }
  int spare = max_half_valence(graph.atom(i)) - half_sum;
  return spare > 0 ? spare / 2 : 0;
}

}  // namespace qmgen
