#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmgen/hybrid_gan.hpp"
#include "qmgen/rng.hpp"

namespace qmgen::motpe {

struct ArityMismatch : std::runtime_error {
  explicit ArityMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct TooFewTrials : std::runtime_error {
  explicit TooFewTrials(const std::string& msg) : std::runtime_error(msg) {}
};

enum class TrialState { Pending, Complete, Failed };

// One architecture evaluation. Objectives are minimized: for the bridge
// search they are (-DCS, training seconds). Failed trials carry
// worst-case objectives so the sampler learns to avoid them.
struct Trial {
  long id = 0;
  gan::ArchitectureConfig config;
  std::vector<double> objectives;
  TrialState state = TrialState::Pending;
  std::uint64_t seed = 0;
};

// Strict Pareto dominance under minimization.
bool dominates(const std::vector<double>& a, const std::vector<double>& b);

// NSGA-II style fronts of trial indices; front 0 is the nondominated
// set, each front is ordered by crowding distance descending (ties by
// index). Pending trials must be filtered out by the caller.
std::vector<std::vector<int>> nondominated_sort(const std::vector<Trial>& trials);

// Crowding distances for a front (indices into `trials`).
std::vector<double> crowding_distances(const std::vector<Trial>& trials,
                                       const std::vector<int>& front);

// Greedy front-wise split into (promising, unpromising): whole fronts
// are taken until |promising| >= ceil(gamma*n) clamped to [1, n-1]; the
// last front is truncated by crowding distance.
std::pair<std::vector<int>, std::vector<int>> split_trials(const std::vector<Trial>& trials,
                                                           double gamma = 0.25);

struct DimSpec {
  int lo = 0;
  int hi = 0;
  bool log_scale = false;

  double position(int v) const;   // value -> kernel-space coordinate
  int round_from(double u) const; // kernel-space coordinate -> clamped value
  int count() const { return hi - lo + 1; }
};

struct SearchSpace {
  DimSpec q_width{4, 16, false};
  DimSpec q_depth{1, 4, false};
  DimSpec c_width{16, 512, true};  // multiplicative span, log2 kernels
  DimSpec c_depth{1, 4, false};

  static SearchSpace paper_bounds() { return SearchSpace{}; }
};

// Discretized univariate Parzen estimator: one truncated Gaussian per
// observation plus a uniform prior component, integrated over integer
// cells and normalized, so every value has strictly positive mass.
class ParzenDensity {
 public:
  ParzenDensity(const DimSpec& dim, const std::vector<int>& observations);

  double pmf(int v) const;
  int sample(Rng& rng) const;
  const DimSpec& dim() const { return dim_; }

 private:
  DimSpec dim_;
  std::vector<double> cell_mass_;
};

struct MotpeConfig {
  int n_startup = 10;
  int n_candidates = 24;
  double gamma = 0.25;
};

// Propose the next architecture: uniform random during startup, then per
// dimension draw candidates from the promising density l and keep the
// candidate maximizing l(x)/g(x). Dimensions are treated independently.
gan::ArchitectureConfig suggest(const std::vector<Trial>& history, const SearchSpace& space,
                                Rng& rng, const MotpeConfig& cfg = {});

// Front 0 of the nondominated sort, as trial copies.
std::vector<Trial> pareto_front(const std::vector<Trial>& trials);

// Front member minimizing the first objective (-DCS), i.e. the best-DCS
// architecture. Requires at least one completed trial.
const Trial& best_dcs_trial(const std::vector<Trial>& trials);

// 2-D hypervolume dominated by `points` against a reference point
// (minimization, ref componentwise worst).
double hypervolume_2d(const std::vector<std::vector<double>>& points,
                      const std::vector<double>& ref);

}  // namespace qmgen::motpe
