#include "qmgen/smiles.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>

namespace qmgen {

namespace {

constexpr int kMaxHeavyAtoms = 9;

struct RingOpening {
  int atom = -1;
  std::optional<BondType> bond;
};

BondType bond_from_char(char c) {
  switch (c) {
    case '-': return BondType::Single;
    case '=': return BondType::Double;
    case '#': return BondType::Triple;
    case ':': return BondType::Aromatic;
  }
  throw std::logic_error("not a bond char");
}

std::optional<AtomType> atom_from_char(char c) {
  switch (c) {
    case 'C': case 'c': return AtomType::C;
    case 'N': case 'n': return AtomType::N;
    case 'O': case 'o': return AtomType::O;
    case 'F': return AtomType::F;
  }
  return std::nullopt;
}

}  // namespace

MolecularGraph parse_smiles(const std::string& s) {
  MolecularGraph graph;
  std::vector<bool> aromatic;
  std::vector<int> branch_stack;
  std::array<RingOpening, 10> rings;  // digits 1..9
  std::optional<BondType> pending;
  int prev = -1;

  auto default_bond = [&](int a, int b) {
    return aromatic[static_cast<std::size_t>(a)] && aromatic[static_cast<std::size_t>(b)]
               ? BondType::Aromatic
               : BondType::Single;
  };

  for (std::size_t pos = 0; pos < s.size(); ++pos) {
    char c = s[pos];
    if (auto at = atom_from_char(c)) {
      if (graph.size() >= kMaxHeavyAtoms) {
        throw SmilesError(SmilesError::Kind::CapacityExceeded,
                          "more than " + std::to_string(kMaxHeavyAtoms) + " heavy atoms");
      }
      int idx = graph.add_atom(*at);
      aromatic.push_back(std::islower(static_cast<unsigned char>(c)) != 0);
      if (prev >= 0) {
        graph.add_bond(prev, idx, pending ? *pending : default_bond(prev, idx));
      } else if (pending) {
        throw SmilesError(SmilesError::Kind::UnsupportedToken,
                          "bond with no preceding atom at position " + std::to_string(pos));
      }
      pending.reset();
      prev = idx;
    } else if (c == '-' || c == '=' || c == '#' || c == ':') {
      if (pending) {
        throw SmilesError(SmilesError::Kind::UnsupportedToken,
                          "consecutive bond symbols at position " + std::to_string(pos));
      }
      pending = bond_from_char(c);
    } else if (c == '(') {
      if (prev < 0) {
        throw SmilesError(SmilesError::Kind::UnbalancedBranch, "branch before any atom");
      }
      branch_stack.push_back(prev);
    } else if (c == ')') {
      if (branch_stack.empty()) {
        throw SmilesError(SmilesError::Kind::UnbalancedBranch, "unmatched ')'");
      }
      if (pending) {
        throw SmilesError(SmilesError::Kind::UnsupportedToken, "bond dangling before ')'");
      }
      prev = branch_stack.back();
      branch_stack.pop_back();
    } else if (c >= '1' && c <= '9') {
      if (prev < 0) {
        throw SmilesError(SmilesError::Kind::UnclosedRing, "ring digit before any atom");
      }
      auto& slot = rings[static_cast<std::size_t>(c - '0')];
      if (slot.atom < 0) {
        slot.atom = prev;
        slot.bond = pending;
      } else {
        if (slot.atom == prev) {
          throw SmilesError(SmilesError::Kind::UnclosedRing, "ring closure to itself");
        }
        if (slot.bond && pending && *slot.bond != *pending) {
          throw SmilesError(SmilesError::Kind::UnsupportedToken,
                            "conflicting ring closure bonds");
        }
        if (graph.bond(slot.atom, prev) != BondType::None) {
          throw SmilesError(SmilesError::Kind::UnsupportedToken,
                            "duplicate bond via ring closure");
        }
        BondType b = pending   ? *pending
                     : slot.bond ? *slot.bond
                                 : default_bond(slot.atom, prev);
        graph.add_bond(slot.atom, prev, b);
        slot = RingOpening{};
      }
      pending.reset();
    } else if (c == '.') {
      if (pending) {
        throw SmilesError(SmilesError::Kind::UnsupportedToken, "bond before fragment dot");
      }
      prev = -1;
    } else {
      throw SmilesError(SmilesError::Kind::UnsupportedToken,
                        std::string("unsupported token '") + c + "' at position " +
                            std::to_string(pos));
    }
  }

  if (!branch_stack.empty()) {
    throw SmilesError(SmilesError::Kind::UnbalancedBranch, "unclosed '('");
  }
  for (const auto& slot : rings) {
    if (slot.atom >= 0) {
      throw SmilesError(SmilesError::Kind::UnclosedRing, "unclosed ring bond");
    }
  }
  if (pending) {
    throw SmilesError(SmilesError::Kind::UnsupportedToken, "dangling bond at end of input");
  }
  if (graph.size() == 0) {
    throw SmilesError(SmilesError::Kind::UnsupportedToken, "no atoms in input");
  }
  return graph;
}

namespace {

struct Writer {
  const MolecularGraph& g;
  std::vector<bool> aromatic;
  std::vector<bool> visited;
  std::vector<std::pair<int, int>> ring_edges;           // i<j, non-tree edges
  std::vector<std::vector<std::pair<int, int>>> ring_at; // atom -> (ring edge idx, other end)
  std::array<int, 16> edge_digit{};                      // ring edge idx -> digit
  std::array<bool, 10> digit_busy{};
  std::string out;

  explicit Writer(const MolecularGraph& graph) : g(graph) {
    auto n = static_cast<std::size_t>(g.size());
    aromatic.assign(n, false);
    for (const auto& [key, type] : g.bonds()) {
      if (type == BondType::Aromatic) {
        aromatic[static_cast<std::size_t>(key.first)] = true;
        aromatic[static_cast<std::size_t>(key.second)] = true;
      }
    }
    visited.assign(n, false);
    ring_at.assign(n, {});
  }

  std::string bond_symbol(int a, int b) const {
    switch (g.bond(a, b)) {
      case BondType::Single:
        return aromatic[static_cast<std::size_t>(a)] && aromatic[static_cast<std::size_t>(b)]
                   ? "-"
                   : "";
      case BondType::Double: return "=";
      case BondType::Triple: return "#";
      case BondType::Aromatic: return "";
      case BondType::None: break;
    }
    return "";
  }

  // Mark tree edges by a DFS forest; the remainder are ring closures.
  std::vector<std::pair<int, int>> forest_tree_edges() const {
    std::vector<std::pair<int, int>> tree;
    std::vector<bool> seen(static_cast<std::size_t>(g.size()), false);
    for (int root = 0; root < g.size(); ++root) {
      if (seen[static_cast<std::size_t>(root)]) continue;
      std::vector<int> stack{root};
      seen[static_cast<std::size_t>(root)] = true;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        auto nbrs = g.neighbors(u);
        std::sort(nbrs.begin(), nbrs.end());
        // reverse so the lowest index is processed first off the stack
        for (auto it = nbrs.rbegin(); it != nbrs.rend(); ++it) {
          int v = it->first;
          if (!seen[static_cast<std::size_t>(v)]) {
            seen[static_cast<std::size_t>(v)] = true;
            tree.emplace_back(std::min(u, v), std::max(u, v));
            stack.push_back(v);
          }
        }
      }
    }
    std::sort(tree.begin(), tree.end());
    return tree;
  }

  void emit_ring_digits(int u) {
    for (auto [edge_idx, other] : ring_at[static_cast<std::size_t>(u)]) {
      if (!visited[static_cast<std::size_t>(other)]) {
        // opening end: grab the smallest free digit
        int digit = 0;
        for (int d = 1; d <= 9; ++d) {
          if (!digit_busy[static_cast<std::size_t>(d)]) {
            digit = d;
            break;
          }
        }
        if (digit == 0) {
          throw InvalidGraph("ring closure digits exhausted");
        }
        digit_busy[static_cast<std::size_t>(digit)] = true;
        edge_digit[static_cast<std::size_t>(edge_idx)] = digit;
        out += static_cast<char>('0' + digit);
      } else {
        int digit = edge_digit[static_cast<std::size_t>(edge_idx)];
        out += bond_symbol(u, other);
        out += static_cast<char>('0' + digit);
        digit_busy[static_cast<std::size_t>(digit)] = false;
      }
    }
  }

  void write_atom(int u) {
    const char* sym = atom_symbol(g.atom(u));
    if (aromatic[static_cast<std::size_t>(u)]) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(sym[0])));
    } else {
      out += sym;
    }
  }

  void dfs(int u, int parent) {
    visited[static_cast<std::size_t>(u)] = true;
    write_atom(u);
    emit_ring_digits(u);
    std::vector<int> children;
    auto nbrs = g.neighbors(u);
    std::sort(nbrs.begin(), nbrs.end());
    for (const auto& [v, type] : nbrs) {
      if (v == parent || visited[static_cast<std::size_t>(v)]) continue;
      bool is_ring = std::binary_search(ring_edges.begin(), ring_edges.end(),
                                        std::make_pair(std::min(u, v), std::max(u, v)));
      if (!is_ring) children.push_back(v);
    }
    for (std::size_t k = 0; k < children.size(); ++k) {
      bool last = k + 1 == children.size();
      if (!last) out += '(';
      out += bond_symbol(u, children[k]);
      dfs(children[k], u);
      if (!last) out += ')';
    }
  }

  std::string run() {
    auto tree = forest_tree_edges();
    for (const auto& [key, type] : g.bonds()) {
      if (!std::binary_search(tree.begin(), tree.end(), key)) {
        if (ring_edges.size() >= edge_digit.size()) {
          throw InvalidGraph("too many ring closures");
        }
        int idx = static_cast<int>(ring_edges.size());
        ring_edges.push_back(key);
        ring_at[static_cast<std::size_t>(key.first)].emplace_back(idx, key.second);
        ring_at[static_cast<std::size_t>(key.second)].emplace_back(idx, key.first);
      }
    }
    bool first = true;
    for (int root = 0; root < g.size(); ++root) {
      if (visited[static_cast<std::size_t>(root)]) continue;
      if (!first) out += '.';
      dfs(root, -1);
      first = false;
    }
    return out;
  }
};

}  // namespace

std::string write_smiles(const MolecularGraph& graph) {
  if (!check_validity(graph)) {
    throw InvalidGraph("graph fails valence check");
  }
  for (AtomType t : graph.atoms()) {
    if (t == AtomType::H) {
      throw InvalidGraph("explicit hydrogen is not expressible in the supported grammar");
    }
  }
  Writer w(graph);
  return w.run();
}

Dataset load_dataset(const std::string& path, std::size_t limit) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open dataset file: " + path);
  }
  Dataset ds;
  ds.source_path = path;
  auto slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = base.find_last_of('.');
  ds.name = dot == std::string::npos ? base : base.substr(0, dot);

  std::string line;
  while (ds.molecules.size() < limit && std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    std::size_t end = line.find_first_of(" \t", start);
    std::string token = line.substr(start, end == std::string::npos ? std::string::npos
                                                                    : end - start);
    try {
      MolecularGraph g = parse_smiles(token);
      if (!check_validity(g)) {
        ++ds.skipped;
        continue;
      }
      ds.molecules.push_back(std::move(g));
    } catch (const SmilesError&) {
      ++ds.skipped;
    }
  }
  if (ds.molecules.empty()) {
    throw EmptyDataset("no usable molecules in " + path);
  }
  return ds;
}

}  // namespace qmgen
