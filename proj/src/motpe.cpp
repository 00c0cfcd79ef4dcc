#include "qmgen/motpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qmgen::motpe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ArityMismatch("objective vectors differ in arity: " + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()));
  }
  bool strictly_better = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strictly_better = true;
  }
  return strictly_better;
}

std::vector<double> crowding_distances(const std::vector<Trial>& trials,
                                       const std::vector<int>& front) {
  const std::size_t n = front.size();
  std::vector<double> dist(n, 0.0);
  if (n == 0) return dist;
  const std::size_t arity = trials[static_cast<std::size_t>(front[0])].objectives.size();
  for (std::size_t obj = 0; obj < arity; ++obj) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      double vx = trials[static_cast<std::size_t>(front[x])].objectives[obj];
      double vy = trials[static_cast<std::size_t>(front[y])].objectives[obj];
      if (vx != vy) return vx < vy;
      return front[x] < front[y];
    });
    double lo = trials[static_cast<std::size_t>(front[order.front()])].objectives[obj];
    double hi = trials[static_cast<std::size_t>(front[order.back()])].objectives[obj];
    dist[order.front()] = kInf;
    dist[order.back()] = kInf;
    if (hi <= lo) continue;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double prev = trials[static_cast<std::size_t>(front[order[i - 1]])].objectives[obj];
      double next = trials[static_cast<std::size_t>(front[order[i + 1]])].objectives[obj];
      dist[order[i]] += (next - prev) / (hi - lo);
    }
  }
  return dist;
}

std::vector<std::vector<int>> nondominated_sort(const std::vector<Trial>& trials) {
  const int n = static_cast<int>(trials.size());
  std::vector<std::vector<int>> fronts;
  std::vector<bool> assigned(static_cast<std::size_t>(n), false);
  int remaining = n;
  while (remaining > 0) {
    std::vector<int> front;
    for (int i = 0; i < n; ++i) {
      if (assigned[static_cast<std::size_t>(i)]) continue;
      bool dominated = false;
      for (int j = 0; j < n; ++j) {
        if (j == i || assigned[static_cast<std::size_t>(j)]) continue;
        if (dominates(trials[static_cast<std::size_t>(j)].objectives,
                      trials[static_cast<std::size_t>(i)].objectives)) {
          dominated = true;
          break;
        }
      }
      if (!dominated) front.push_back(i);
    }
    for (int i : front) assigned[static_cast<std::size_t>(i)] = true;
    remaining -= static_cast<int>(front.size());

    auto dist = crowding_distances(trials, front);
    std::vector<std::size_t> order(front.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (dist[a] != dist[b]) return dist[a] > dist[b];
      return front[a] < front[b];
    });
    std::vector<int> sorted;
    sorted.reserve(front.size());
    for (std::size_t i : order) sorted.push_back(front[i]);
    fronts.push_back(std::move(sorted));
  }
  return fronts;
}

std::pair<std::vector<int>, std::vector<int>> split_trials(const std::vector<Trial>& trials,
                                                           double gamma) {
  const int n = static_cast<int>(trials.size());
  if (n < 2) {
    throw TooFewTrials("split_trials needs at least two finished trials, got " +
                       std::to_string(n));
  }
  int target = static_cast<int>(std::ceil(gamma * n));
  target = std::clamp(target, 1, n - 1);

  auto fronts = nondominated_sort(trials);
  std::vector<int> promising;
  for (const auto& front : fronts) {
    if (static_cast<int>(promising.size()) >= target) break;
    int need = target - static_cast<int>(promising.size());
    if (static_cast<int>(front.size()) <= need) {
      promising.insert(promising.end(), front.begin(), front.end());
    } else {
      // fronts are already crowding-distance ordered; take the most
      // spread-out members
      promising.insert(promising.end(), front.begin(), front.begin() + need);
    }
  }
  std::vector<bool> is_promising(static_cast<std::size_t>(n), false);
  for (int i : promising) is_promising[static_cast<std::size_t>(i)] = true;
  std::vector<int> unpromising;
  for (int i = 0; i < n; ++i) {
    if (!is_promising[static_cast<std::size_t>(i)]) unpromising.push_back(i);
  }
  return {std::move(promising), std::move(unpromising)};
}

double DimSpec::position(int v) const {
  return log_scale ? std::log2(static_cast<double>(v)) : static_cast<double>(v);
}

int DimSpec::round_from(double u) const {
  double v = log_scale ? std::exp2(u) : u;
  int r = static_cast<int>(std::lround(v));
  return std::clamp(r, lo, hi);
}

ParzenDensity::ParzenDensity(const DimSpec& dim, const std::vector<int>& observations)
    : dim_(dim) {
  const int count = dim.count();
  cell_mass_.assign(static_cast<std::size_t>(count), 0.0);

  // integer-cell edges in kernel space; the first/last cells extend half
  // a step beyond the domain so every value has a full-width cell
  std::vector<double> edges(static_cast<std::size_t>(count) + 1, 0.0);
  for (int i = 0; i + 1 < count; ++i) {
    edges[static_cast<std::size_t>(i) + 1] =
        0.5 * (dim.position(dim.lo + i) + dim.position(dim.lo + i + 1));
  }
  edges[0] = 2.0 * dim.position(dim.lo) - edges[1];
  edges[static_cast<std::size_t>(count)] =
      2.0 * dim.position(dim.hi) - edges[static_cast<std::size_t>(count) - 1];
  const double span = dim.position(dim.hi) - dim.position(dim.lo);
  const double total_width = edges.back() - edges.front();

  const std::size_t n_obs = observations.size();
  const double weight = 1.0 / static_cast<double>(n_obs + 1);

  // uniform prior component
  for (int i = 0; i < count; ++i) {
    cell_mass_[static_cast<std::size_t>(i)] +=
        weight * (edges[static_cast<std::size_t>(i) + 1] - edges[static_cast<std::size_t>(i)]) /
        total_width;
  }
  // one truncated Gaussian per observation
  const double min_step = span / std::max(1, count - 1);
  const double bandwidth =
      n_obs > 0 ? std::max(span / std::sqrt(static_cast<double>(n_obs)), min_step) : min_step;
  for (int obs : observations) {
    const double mu = dim.position(std::clamp(obs, dim.lo, dim.hi));
    const double z_lo = (edges.front() - mu) / bandwidth;
    const double z_hi = (edges.back() - mu) / bandwidth;
    const double truncated = norm_cdf(z_hi) - norm_cdf(z_lo);
    if (truncated <= 0.0) continue;
    for (int i = 0; i < count; ++i) {
      const double a = (edges[static_cast<std::size_t>(i)] - mu) / bandwidth;
      const double b = (edges[static_cast<std::size_t>(i) + 1] - mu) / bandwidth;
      cell_mass_[static_cast<std::size_t>(i)] +=
          weight * (norm_cdf(b) - norm_cdf(a)) / truncated;
    }
  }
  // normalization guard against truncation round-off
  double total = 0.0;
  for (double m : cell_mass_) total += m;
  for (double& m : cell_mass_) m /= total;
}

double ParzenDensity::pmf(int v) const {
  if (v < dim_.lo || v > dim_.hi) return 0.0;
  return cell_mass_[static_cast<std::size_t>(v - dim_.lo)];
}

int ParzenDensity::sample(Rng& rng) const {
  double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < dim_.count(); ++i) {
    acc += cell_mass_[static_cast<std::size_t>(i)];
    if (u < acc) return dim_.lo + i;
  }
  return dim_.hi;
}

namespace {

int suggest_dimension(const DimSpec& dim, const std::vector<int>& promising,
                      const std::vector<int>& unpromising, Rng& rng, int n_candidates) {
  ParzenDensity l(dim, promising);
  ParzenDensity g(dim, unpromising);
  int best = dim.lo;
  double best_score = -kInf;
  for (int c = 0; c < n_candidates; ++c) {
    int candidate = l.sample(rng);
    double score = l.pmf(candidate) / g.pmf(candidate);
    if (score > best_score) {
      best_score = score;
      best = candidate;
    }
  }
  return best;
}

int uniform_dimension(const DimSpec& dim, Rng& rng) {
  if (!dim.log_scale) return rng.uniform_int(dim.lo, dim.hi);
  double u = rng.uniform(dim.position(dim.lo), dim.position(dim.hi));
  return dim.round_from(u);
}

}  // namespace

gan::ArchitectureConfig suggest(const std::vector<Trial>& history, const SearchSpace& space,
                                Rng& rng, const MotpeConfig& cfg) {
  std::vector<Trial> finished;
  for (const auto& t : history) {
    if (t.state != TrialState::Pending) finished.push_back(t);
  }
  gan::ArchitectureConfig out;
  if (static_cast<int>(finished.size()) < cfg.n_startup || finished.size() < 2) {
    out.q_width = uniform_dimension(space.q_width, rng);
    out.q_depth = uniform_dimension(space.q_depth, rng);
    out.c_width = uniform_dimension(space.c_width, rng);
    out.c_depth = uniform_dimension(space.c_depth, rng);
    return out;
  }
  auto [prom, unprom] = split_trials(finished, cfg.gamma);
  auto values = [&](const std::vector<int>& idx, auto getter) {
    std::vector<int> vals;
    vals.reserve(idx.size());
    for (int i : idx) vals.push_back(getter(finished[static_cast<std::size_t>(i)].config));
    return vals;
  };
  auto qw = [](const gan::ArchitectureConfig& c) { return c.q_width; };
  auto qd = [](const gan::ArchitectureConfig& c) { return c.q_depth; };
  auto cw = [](const gan::ArchitectureConfig& c) { return c.c_width; };
  auto cd = [](const gan::ArchitectureConfig& c) { return c.c_depth; };
  out.q_width = suggest_dimension(space.q_width, values(prom, qw), values(unprom, qw), rng,
                                  cfg.n_candidates);
  out.q_depth = suggest_dimension(space.q_depth, values(prom, qd), values(unprom, qd), rng,
                                  cfg.n_candidates);
  out.c_width = suggest_dimension(space.c_width, values(prom, cw), values(unprom, cw), rng,
                                  cfg.n_candidates);
  out.c_depth = suggest_dimension(space.c_depth, values(prom, cd), values(unprom, cd), rng,
                                  cfg.n_candidates);
  return out;
}

std::vector<Trial> pareto_front(const std::vector<Trial>& trials) {
  if (trials.empty()) return {};
  auto fronts = nondominated_sort(trials);
  std::vector<Trial> out;
  for (int i : fronts.front()) out.push_back(trials[static_cast<std::size_t>(i)]);
  return out;
}

const Trial& best_dcs_trial(const std::vector<Trial>& trials) {
  if (trials.empty()) {
    throw TooFewTrials("best_dcs_trial needs at least one trial");
  }
  auto front = nondominated_sort(trials).front();
  int best = front.front();
  for (int i : front) {
    if (trials[static_cast<std::size_t>(i)].objectives[0] <
        trials[static_cast<std::size_t>(best)].objectives[0]) {
      best = i;
    }
  }
  return trials[static_cast<std::size_t>(best)];
}

double hypervolume_2d(const std::vector<std::vector<double>>& points,
                      const std::vector<double>& ref) {
  if (ref.size() != 2) {
    throw ArityMismatch("hypervolume_2d needs a 2-dim reference point");
  }
  // keep the nondominated, in-bounds points
  std::vector<std::vector<double>> front;
  for (const auto& p : points) {
    if (p.size() != 2) throw ArityMismatch("hypervolume_2d needs 2-dim points");
    if (p[0] > ref[0] || p[1] > ref[1]) continue;
    bool dominated = false;
    for (const auto& q : points) {
      if (&q != &p && dominates(q, p)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(p);
  }
  if (front.empty()) return 0.0;
  std::sort(front.begin(), front.end());
  front.erase(std::unique(front.begin(), front.end()), front.end());
  double hv = 0.0;
  for (std::size_t i = 0; i < front.size(); ++i) {
    double next_f1 = i + 1 < front.size() ? front[i + 1][0] : ref[0];
    hv += (next_f1 - front[i][0]) * (ref[1] - front[i][1]);
  }
  return hv;
}

}  // namespace qmgen::motpe
