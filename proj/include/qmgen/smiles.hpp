#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "qmgen/molgraph.hpp"

namespace qmgen {

struct SmilesError : std::runtime_error {
  enum class Kind { UnsupportedToken, UnbalancedBranch, UnclosedRing, CapacityExceeded };
  Kind kind;
  SmilesError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct InvalidGraph : std::runtime_error {
  explicit InvalidGraph(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyDataset : std::runtime_error {
  explicit EmptyDataset(const std::string& msg) : std::runtime_error(msg) {}
};

struct Dataset {
  std::vector<MolecularGraph> molecules;
  std::string source_path;
  std::string name;
  int skipped = 0;  // unparseable or invalid input lines

  bool empty() const { return molecules.empty(); }
  std::size_t size() const { return molecules.size(); }
};

// Parse the QM9-subset SMILES grammar: atoms C,N,O,F (aromatic c,n,o),
// bonds - = # :, branches, ring closures 1-9. Bracket atoms, charges,
// stereo markers and %nn closures are rejected with UnsupportedToken.
// Aromaticity is syntactic: a default bond between two aromatic atoms is
// aromatic; no ring perception is done.
MolecularGraph parse_smiles(const std::string& s);

// Deterministic lowest-index DFS writer. Output re-parses into an
// isomorphic graph. Throws InvalidGraph for graphs the grammar cannot
// express (pathological cases needing >9 simultaneously open rings) and
// for graphs failing check_validity.
std::string write_smiles(const MolecularGraph& graph);

// Load up to `limit` molecules from a one-SMILES-per-line file. Lines
// starting with '#' and blank lines are ignored; lines that fail to parse
// or fail validity are skipped and counted. Throws IoError when the file
// cannot be read, EmptyDataset when nothing usable remains.
Dataset load_dataset(const std::string& path, std::size_t limit);

}  // namespace qmgen
