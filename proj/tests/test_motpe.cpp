#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "qmgen/motpe.hpp"
#include "qmgen/rng.hpp"

using namespace qmgen;
using namespace qmgen::motpe;

namespace {

Trial make_trial(long id, std::vector<double> obj) {
  Trial t;
  t.id = id;
  t.objectives = std::move(obj);
  t.state = TrialState::Complete;
  return t;
}

std::vector<Trial> random_trials(int n, Rng& rng) {
  std::vector<Trial> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(make_trial(i, {rng.uniform(0, 10), rng.uniform(0, 10)}));
  }
  return out;
}

// Brute-force front assignment: peel nondominated sets.
std::vector<int> oracle_front_index(const std::vector<Trial>& trials) {
  const int n = static_cast<int>(trials.size());
  std::vector<int> front(static_cast<std::size_t>(n), -1);
  int assigned = 0;
  int level = 0;
  while (assigned < n) {
    for (int i = 0; i < n; ++i) {
      if (front[static_cast<std::size_t>(i)] >= 0) continue;
      bool dominated = false;
      for (int j = 0; j < n; ++j) {
        if (front[static_cast<std::size_t>(j)] >= 0 &&
            front[static_cast<std::size_t>(j)] != level) {
          continue;
        }
        if (j == i || front[static_cast<std::size_t>(j)] == level) continue;
        if (dominates(trials[static_cast<std::size_t>(j)].objectives,
                      trials[static_cast<std::size_t>(i)].objectives)) {
          dominated = true;
          break;
        }
      }
      if (!dominated) {
        front[static_cast<std::size_t>(i)] = level;
        ++assigned;
      }
    }
    ++level;
  }
  return front;
}

}  // namespace

TEST_CASE("dominance basics") {
  CHECK(dominates({1, 2}, {2, 3}));
  CHECK_FALSE(dominates({1, 3}, {2, 2}));
  CHECK_FALSE(dominates({2, 2}, {1, 3}));
  CHECK_FALSE(dominates({1, 2}, {1, 2}));
  CHECK(dominates({1, 2}, {1, 3}));
  CHECK_THROWS_AS(dominates({1, 2}, {1, 2, 3}), ArityMismatch);
}

TEST_CASE("dominance is irreflexive and transitive on random triples") {
  Rng rng(5);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> a{rng.uniform(0, 4), rng.uniform(0, 4)};
    std::vector<double> b{rng.uniform(0, 4), rng.uniform(0, 4)};
    std::vector<double> c{rng.uniform(0, 4), rng.uniform(0, 4)};
    CHECK_FALSE(dominates(a, a));
    if (dominates(a, b) && dominates(b, c)) {
      CHECK(dominates(a, c));
    }
  }
}

TEST_CASE("nondominated sort on hand cases") {
  auto all_front0 = nondominated_sort({make_trial(0, {1, 3}), make_trial(1, {3, 1}),
                                       make_trial(2, {2, 2})});
  REQUIRE(all_front0.size() == 1);
  CHECK(all_front0[0].size() == 3);

  auto two = nondominated_sort({make_trial(0, {1, 1}), make_trial(1, {2, 2})});
  REQUIRE(two.size() == 2);
  CHECK(two[0] == std::vector<int>{0});
  CHECK(two[1] == std::vector<int>{1});
}

TEST_CASE("nondominated sort matches the brute-force oracle") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    auto trials = random_trials(20, rng);
    auto fronts = nondominated_sort(trials);
    auto oracle = oracle_front_index(trials);
    for (std::size_t level = 0; level < fronts.size(); ++level) {
      for (int idx : fronts[level]) {
        CHECK(oracle[static_cast<std::size_t>(idx)] == static_cast<int>(level));
      }
    }
    // partition: every index appears exactly once
    std::vector<int> seen;
    for (const auto& f : fronts) seen.insert(seen.end(), f.begin(), f.end());
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < 20; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);
    // no within-front dominance
    for (const auto& f : fronts) {
      for (int a : f) {
        for (int b : f) {
          if (a == b) continue;
          CHECK_FALSE(dominates(trials[static_cast<std::size_t>(a)].objectives,
                                trials[static_cast<std::size_t>(b)].objectives));
        }
      }
    }
  }
}

TEST_CASE("crowding distance marks boundary points infinite") {
  std::vector<Trial> trials{make_trial(0, {1, 4}), make_trial(1, {2, 3}), make_trial(2, {3, 2}),
                            make_trial(3, {4, 1})};
  auto d = crowding_distances(trials, {0, 1, 2, 3});
  CHECK(std::isinf(d[0]));
  CHECK(std::isinf(d[3]));
  CHECK(d[1] == doctest::Approx(d[2]));
  CHECK(d[1] > 0.0);
}

TEST_CASE("split takes whole small fronts") {
  // n=8, target ceil(0.25*8)=2; front 0 has exactly two members
  std::vector<Trial> trials{make_trial(0, {0, 1}), make_trial(1, {1, 0}),
                            make_trial(2, {2, 2}), make_trial(3, {3, 2}),
                            make_trial(4, {2, 3}), make_trial(5, {4, 4}),
                            make_trial(6, {5, 4}), make_trial(7, {4, 5})};
  auto [prom, unprom] = split_trials(trials);
  std::sort(prom.begin(), prom.end());
  CHECK(prom == std::vector<int>{0, 1});
  CHECK(prom.size() + unprom.size() == trials.size());
}

TEST_CASE("split truncates a large first front by crowding distance") {
  // n=8, target 2, front 0 has five members: expect the two extreme
  // corners (infinite crowding, lowest index tie-break)
  std::vector<Trial> trials{make_trial(0, {0, 8}), make_trial(1, {2, 6}),
                            make_trial(2, {4, 4}), make_trial(3, {6, 2}),
                            make_trial(4, {8, 0}), make_trial(5, {9, 9}),
                            make_trial(6, {8, 9}), make_trial(7, {9, 8})};
  auto [prom, unprom] = split_trials(trials);
  REQUIRE(prom.size() == 2);
  std::sort(prom.begin(), prom.end());
  CHECK(prom == std::vector<int>{0, 4});

  // promising/unpromising partition the trial set
  std::vector<int> all = prom;
  all.insert(all.end(), unprom.begin(), unprom.end());
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 8; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("split needs at least two trials") {
  CHECK_THROWS_AS(split_trials({make_trial(0, {1, 1})}), TooFewTrials);
}

TEST_CASE("empty parzen density is uniform on a linear dimension") {
  DimSpec dim{4, 16, false};
  ParzenDensity d(dim, {});
  for (int v = 4; v <= 16; ++v) {
    CHECK(d.pmf(v) == doctest::Approx(1.0 / 13.0).epsilon(1e-9));
  }
}

TEST_CASE("parzen mass sums to one") {
  Rng rng(11);
  for (const DimSpec& dim : {DimSpec{4, 16, false}, DimSpec{16, 512, true}, DimSpec{1, 4, false}}) {
    std::vector<int> obs;
    for (int i = 0; i < 5; ++i) obs.push_back(rng.uniform_int(dim.lo, dim.hi));
    ParzenDensity d(dim, obs);
    double total = 0.0;
    for (int v = dim.lo; v <= dim.hi; ++v) total += d.pmf(v);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("single observation puts the mode at the observation") {
  DimSpec dim{4, 16, false};
  ParzenDensity d(dim, {7});
  for (int v = 4; v <= 16; ++v) {
    if (v != 7) CHECK(d.pmf(7) > d.pmf(v));
  }
}

TEST_CASE("suggestions respect bounds with and without history") {
  SearchSpace space;
  Rng rng(13);
  std::vector<Trial> history;

  auto in_bounds = [](const gan::ArchitectureConfig& c) {
    return c.q_width >= 4 && c.q_width <= 16 && c.q_depth >= 1 && c.q_depth <= 4 &&
           c.c_width >= 16 && c.c_width <= 512 && c.c_depth >= 1 && c.c_depth <= 4;
  };

  for (int i = 0; i < 200; ++i) {
    CHECK(in_bounds(suggest(history, space, rng)));
  }
  Rng obj_rng(17);
  for (int i = 0; i < 40; ++i) {
    Trial t = make_trial(i, {obj_rng.uniform(0, 1), obj_rng.uniform(0, 1)});
    t.config.q_width = obj_rng.uniform_int(4, 16);
    t.config.q_depth = obj_rng.uniform_int(1, 4);
    t.config.c_width = obj_rng.uniform_int(16, 512);
    t.config.c_depth = obj_rng.uniform_int(1, 4);
    history.push_back(std::move(t));
  }
  for (int i = 0; i < 500; ++i) {
    CHECK(in_bounds(suggest(history, space, rng)));
  }
}

TEST_CASE("suggestions concentrate on clearly promising values") {
  // ten dominating trials all at q_width 7, thirty spread losers
  std::vector<Trial> history;
  Rng setup(19);
  for (int i = 0; i < 10; ++i) {
    Trial t = make_trial(i, {0.0, 0.0});
    t.config.q_width = 7;
    t.config.q_depth = setup.uniform_int(1, 4);
    t.config.c_width = setup.uniform_int(16, 512);
    t.config.c_depth = setup.uniform_int(1, 4);
    history.push_back(std::move(t));
  }
  for (int i = 10; i < 40; ++i) {
    Trial t = make_trial(i, {setup.uniform(1, 2), setup.uniform(1, 2)});
    t.config.q_width = setup.uniform_int(4, 16);
    t.config.q_depth = setup.uniform_int(1, 4);
    t.config.c_width = setup.uniform_int(16, 512);
    t.config.c_depth = setup.uniform_int(1, 4);
    history.push_back(std::move(t));
  }
  SearchSpace space;
  Rng rng(23);
  int hits = 0;
  const int reps = 1000;
  for (int i = 0; i < reps; ++i) {
    if (suggest(history, space, rng).q_width == 7) ++hits;
  }
  CHECK(hits > reps / 2);
}

TEST_CASE("pending trials are excluded from density building") {
  std::vector<Trial> history;
  for (int i = 0; i < 9; ++i) history.push_back(make_trial(i, {1.0 * i, 1.0 * (9 - i)}));
  Trial pending;
  pending.id = 99;
  pending.state = TrialState::Pending;
  history.push_back(pending);
  // nine finished < n_startup=10: must take the startup path and not
  // trip on the pending trial's empty objectives
  SearchSpace space;
  Rng rng(29);
  auto cfg = suggest(history, space, rng);
  CHECK(cfg.q_width >= 4);
}

TEST_CASE("pareto front and best-DCS selection") {
  auto single = pareto_front({make_trial(0, {1, 2})});
  REQUIRE(single.size() == 1);
  CHECK(single[0].id == 0);

  std::vector<Trial> table2{make_trial(0, {-1.19, 900}), make_trial(1, {-0.52, 300})};
  auto front = pareto_front(table2);
  CHECK(front.size() == 2);
  CHECK(best_dcs_trial(table2).id == 0);

  Rng rng(31);
  auto trials = random_trials(50, rng);
  auto f0 = pareto_front(trials);
  auto oracle = oracle_front_index(trials);
  std::size_t oracle_count = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (oracle[i] == 0) ++oracle_count;
  }
  CHECK(f0.size() == oracle_count);
  for (const auto& t : f0) {
    CHECK(oracle[static_cast<std::size_t>(t.id)] == 0);
  }
}

TEST_CASE("hypervolume of a two-point front") {
  double hv = hypervolume_2d({{1, 2}, {2, 1}}, {3, 3});
  CHECK(hv == doctest::Approx(3.0));
  CHECK(hypervolume_2d({}, {3, 3}) == 0.0);
  // dominated points add nothing
  CHECK(hypervolume_2d({{1, 2}, {2, 1}, {2.5, 2.5}}, {3, 3}) == doctest::Approx(3.0));
}
