#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qmgen/molgraph.hpp"
#include "qmgen/smiles.hpp"

namespace qmgen {

struct EmptyReference : std::runtime_error {
  explicit EmptyReference(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyBatch : std::runtime_error {
  explicit EmptyBatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct Descriptors {
  double mol_weight = 0.0;   // amu, implicit hydrogens included
  double logp_raw = 0.0;
  int hbond_acceptors = 0;   // N + O count
  int hbond_donors = 0;      // N/O carrying at least one implicit H
  double tpsa = 0.0;         // Å²
  int rotatable_bonds = 0;
  int aromatic_rings = 0;
  int heavy_atoms = 0;
};

struct PropertyScores {
  bool valid = false;
  double qed = 0.0;
  double logp = 0.0;
  double sa = 0.0;
  double dcs = 0.0;
};

// Radius-1 atom environment frequencies over a reference dataset; the
// rarity statistics behind the SA score. Deterministic given the dataset.
class FragmentTable {
 public:
  explicit FragmentTable(const Dataset& ref);

  // Occurrences of the environment key, 0 when unseen.
  long count(const std::string& key) const;
  long total() const { return total_; }

  static std::string environment_key(const MolecularGraph& g, int atom);

 private:
  std::unordered_map<std::string, long> counts_;
  long total_ = 0;
};

// Bundles the reference dataset with its fragment table so batch scoring
// does not rebuild statistics per molecule.
struct ScoringContext {
  explicit ScoringContext(const Dataset& ref_) : ref(ref_), fragments(ref_) {}
  const Dataset& ref;
  FragmentTable fragments;
};

struct ScoreNormalization {
  // MolGAN-lineage logP window; the raw score is affinely mapped from
  // [logp_min, logp_max] onto [0,1] and clamped.
  double logp_min = -2.12;
  double logp_max = 6.26;
};

Descriptors compute_descriptors(const MolecularGraph& graph);

// Additive atom-contribution logP over a built-in simplified typing table
// for C/N/O/F/H environments.
double crippen_logp(const MolecularGraph& graph);

// Synthetic-accessibility estimate in [1,10], lower is easier: mean
// environment rarity against the reference plus complexity penalties
// (size, branching, ring fusion, macrocycle).
double sa_score(const MolecularGraph& graph, const FragmentTable& fragments);
double sa_score(const MolecularGraph& graph, const Dataset& ref);

// Weighted geometric mean of eight desirability curves; the structural
// alert descriptor is pinned to its neutral value (no alert library).
// Each desirability is floored at 0.01 so the result stays positive.
double qed_lite(const Descriptors& d);

// Descriptor value at which QED curve `index` (0..7, same order as the
// qed_lite inputs) peaks; at that input the curve's desirability is 1.
double qed_curve_argmax(int index);

struct NormalizedScores {
  double qed = 0.0;
  double logp = 0.0;
  double sa = 0.0;
};

NormalizedScores normalize_scores(double qed_raw, double logp_raw, double sa_raw,
                                  const ScoreNormalization& cfg = {});

double dcs(const NormalizedScores& s);

PropertyScores score_molecule(const MolecularGraph& graph, const ScoringContext& ctx);
PropertyScores score_molecule(const MolecularGraph& graph, const Dataset& ref);

// Feature vector feeding the Fréchet distance: heavy-atom count, bond
// order histogram (4), HBA, HBD, mol_weight/10.
std::array<double, 8> frechet_features(const MolecularGraph& graph);

// Discrete Fréchet distance between the two batches after mapping each
// molecule to its feature vector and sorting lexicographically (so the
// distance does not depend on batch order).
double frechet_distance(const Dataset& gen, const Dataset& real);

// Discrete Fréchet distance between explicit point sequences.
double frechet_distance_points(const std::vector<std::vector<double>>& a,
                               const std::vector<std::vector<double>>& b);

}  // namespace qmgen
