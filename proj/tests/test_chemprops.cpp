#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qmgen/chemprops.hpp"
#include "qmgen/rng.hpp"
#include "qmgen/smiles.hpp"
#include "test_util.hpp"

using namespace qmgen;

namespace {

Dataset dataset_from(const std::vector<std::string>& smiles) {
  Dataset ds;
  ds.name = "inline";
  for (const auto& s : smiles) {
    ds.molecules.push_back(parse_smiles(s));
  }
  return ds;
}

Dataset tiny_reference() {
  return dataset_from({"C", "N", "O", "CO", "CC", "CCO", "C=O", "CCC", "CC(C)C", "CCN", "CC=O",
                       "c1ccccc1", "Cc1ccccc1", "CCCCC", "OCC(O)CO"});
}

// Exhaustive discrete Fréchet: enumerate every monotone coupling and take
// the min over couplings of the max pointwise distance.
double frechet_exhaustive(const std::vector<std::vector<double>>& a,
                          const std::vector<std::vector<double>>& b) {
  auto dist = [](const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += (p[k] - q[k]) * (p[k] - q[k]);
    return std::sqrt(s);
  };
  double best = 1e300;
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j,
                                                                   double worst) {
    worst = std::max(worst, dist(a[i], b[j]));
    if (worst >= best) return;
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = worst;
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, worst);
    if (j + 1 < b.size()) walk(i, j + 1, worst);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, worst);
  };
  walk(0, 0, 0.0);
  return best;
}

}  // namespace

TEST_CASE("methane descriptors") {
  auto d = compute_descriptors(parse_smiles("C"));
  CHECK(d.heavy_atoms == 1);
  CHECK(d.hbond_acceptors == 0);
  CHECK(d.hbond_donors == 0);
  CHECK(d.rotatable_bonds == 0);
  CHECK(d.mol_weight == doctest::Approx(16.04).epsilon(0.001));
}

TEST_CASE("methanol descriptors") {
  auto d = compute_descriptors(parse_smiles("CO"));
  CHECK(d.hbond_acceptors == 1);
  CHECK(d.hbond_donors == 1);
  CHECK(d.tpsa == doctest::Approx(20.23));
}

TEST_CASE("benzene descriptors") {
  auto d = compute_descriptors(parse_smiles("c1ccccc1"));
  CHECK(d.aromatic_rings == 1);
  CHECK(d.rotatable_bonds == 0);
}

TEST_CASE("butane has one rotatable bond") {
  auto d = compute_descriptors(parse_smiles("CCCC"));
  CHECK(d.rotatable_bonds == 1);
}

TEST_CASE("descriptor computation rejects invalid graphs") {
  MolecularGraph g;
  g.add_atom(AtomType::O);
  g.add_atom(AtomType::C);
  g.add_bond(0, 1, BondType::Triple);
  CHECK_THROWS_AS(compute_descriptors(g), InvalidGraph);
}

TEST_CASE("crippen logp of methane matches the published hydrocarbon entries") {
  CHECK(crippen_logp(parse_smiles("C")) == doctest::Approx(0.636).epsilon(0.02));
}

TEST_CASE("crippen logp orders octane above methanol") {
  CHECK(crippen_logp(parse_smiles("CCCCCCCC")) > crippen_logp(parse_smiles("CO")));
}

TEST_CASE("explicit hydrogen atoms take the documented fallback contribution") {
  MolecularGraph g;
  g.add_atom(AtomType::C);
  g.add_atom(AtomType::H);
  g.add_bond(0, 1, BondType::Single);
  // C keeps its hydrocarbon typing and three implicit H; the explicit H
  // node itself is untyped and falls back to the default constant.
  double expected = 0.1441 + 3 * 0.1230 + 0.08;
  CHECK(crippen_logp(g) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("sa score of methane against the reference is low") {
  auto ref = tiny_reference();
  double sa = sa_score(parse_smiles("C"), ref);
  CHECK(sa >= 1.0);
  CHECK(sa <= 3.0);
}

TEST_CASE("sa score is maximal when every environment is unseen") {
  auto ref = tiny_reference();
  double sa = sa_score(parse_smiles("N#N"), ref);
  CHECK(sa >= 6.0);
  double sa2 = sa_score(parse_smiles("FF"), ref);
  CHECK(sa2 >= 6.0);
}

TEST_CASE("sa score is deterministic") {
  auto ref = tiny_reference();
  auto g = parse_smiles("CCO");
  CHECK(sa_score(g, ref) == sa_score(g, ref));
}

TEST_CASE("sa score needs a non-empty reference") {
  Dataset empty;
  CHECK_THROWS_AS(FragmentTable{empty}, EmptyReference);
}

TEST_CASE("qed is exactly one at every curve's peak") {
  Descriptors d;
  // Build the descriptor set sitting at each desirability maximum. The
  // integer descriptors cannot express fractional peaks, so drive the
  // check through the raw curve interface instead.
  double num = 0.0;
  (void)d;
  std::array<double, 8> at_peak{};
  for (int i = 0; i < 8; ++i) at_peak[static_cast<std::size_t>(i)] = qed_curve_argmax(i);
  // qed_lite computes from Descriptors; emulate its aggregation here via
  // a molecule-independent identity: a peak input yields desirability 1
  // for every curve, so the weighted geometric mean must be 1.
  (void)num;
  Descriptors peak;
  peak.mol_weight = at_peak[0];
  peak.logp_raw = at_peak[1];
  peak.hbond_acceptors = static_cast<int>(std::lround(at_peak[2]));
  peak.hbond_donors = static_cast<int>(std::lround(at_peak[3]));
  peak.tpsa = at_peak[4];
  peak.rotatable_bonds = static_cast<int>(std::lround(at_peak[5]));
  peak.aromatic_rings = static_cast<int>(std::lround(at_peak[6]));
  double q = qed_lite(peak);
  CHECK(q > 0.9);  // integer rounding keeps this marginally below 1
  CHECK(q <= 1.0 + 1e-12);
}

TEST_CASE("qed stays positive even for hostile descriptors") {
  Descriptors d;
  d.mol_weight = 5000.0;
  d.logp_raw = 40.0;
  d.hbond_acceptors = 40;
  d.hbond_donors = 40;
  d.tpsa = 900.0;
  d.rotatable_bonds = 60;
  d.aromatic_rings = 9;
  CHECK(qed_lite(d) > 0.0);
}

TEST_CASE("methanol qed lands in the druglikeness ballpark") {
  double q = qed_lite(compute_descriptors(parse_smiles("CO")));
  CHECK(q >= 0.3);
  CHECK(q <= 0.5);
}

TEST_CASE("normalization endpoints") {
  auto top = normalize_scores(0.5, 6.26, 10.0);
  CHECK(top.logp == doctest::Approx(1.0));
  CHECK(top.sa == doctest::Approx(0.0));

  auto bottom = normalize_scores(0.5, -2.12, 1.0);
  CHECK(bottom.logp == doctest::Approx(0.0));
  CHECK(bottom.sa == doctest::Approx(1.0));

  auto mid = normalize_scores(0.5, 2.07, 5.5);
  CHECK(mid.logp == doctest::Approx(0.5));
  CHECK(mid.sa == doctest::Approx(0.5));
}

TEST_CASE("normalized outputs stay inside the unit interval") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    auto s = normalize_scores(rng.uniform(-1, 2), rng.uniform(-30, 30), rng.uniform(-5, 20));
    CHECK(s.qed >= 0.0);
    CHECK(s.qed <= 1.0);
    CHECK(s.logp >= 0.0);
    CHECK(s.logp <= 1.0);
    CHECK(s.sa >= 0.0);
    CHECK(s.sa <= 1.0);
  }
}

TEST_CASE("dcs arithmetic") {
  CHECK(dcs({1.0, 1.0, 1.0}) == doctest::Approx(10.0));
  CHECK(dcs({0.5, 0.5, 0.5}) == doctest::Approx(1.25));
  // Table-1 row: the per-batch mean 1.19 differs because published DCS
  // averages per molecule; the formula itself gives 1.20516.
  CHECK(std::abs(dcs({0.44, 0.83, 0.33}) - 1.20516) < 1e-9);
}

TEST_CASE("dcs is monotone in each input") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    NormalizedScores s{rng.uniform(), rng.uniform(), rng.uniform()};
    double base = dcs(s);
    NormalizedScores up = s;
    up.qed = std::min(1.0, s.qed + 0.1);
    CHECK(dcs(up) >= base);
    up = s;
    up.logp = std::min(1.0, s.logp + 0.1);
    CHECK(dcs(up) >= base);
    up = s;
    up.sa = std::min(1.0, s.sa + 0.1);
    CHECK(dcs(up) >= base);
  }
}

TEST_CASE("invalid molecules score exactly zero") {
  MolecularGraph g;
  g.add_atom(AtomType::O);
  g.add_atom(AtomType::C);
  g.add_bond(0, 1, BondType::Triple);
  auto scores = score_molecule(g, tiny_reference());
  CHECK_FALSE(scores.valid);
  CHECK(scores.qed == 0.0);
  CHECK(scores.logp == 0.0);
  CHECK(scores.sa == 0.0);
  CHECK(scores.dcs == 0.0);
}

TEST_CASE("methanol scores through the full pipeline") {
  auto scores = score_molecule(parse_smiles("CO"), tiny_reference());
  CHECK(scores.valid);
  CHECK(scores.dcs > 0.0);
  CHECK(scores.dcs == doctest::Approx(10.0 * scores.qed * scores.logp * scores.sa).epsilon(1e-9));
}

TEST_CASE("scoring is deterministic") {
  ScoringContext ctx(tiny_reference());
  auto g = parse_smiles("CC(=O)O");
  auto a = score_molecule(g, ctx);
  auto b = score_molecule(g, ctx);
  CHECK(a.qed == b.qed);
  CHECK(a.logp == b.logp);
  CHECK(a.sa == b.sa);
  CHECK(a.dcs == b.dcs);
}

TEST_CASE("frechet distance of a batch with itself is zero") {
  auto ds = tiny_reference();
  CHECK(frechet_distance(ds, ds) == doctest::Approx(0.0));
}

TEST_CASE("frechet distance on hand-checked sequences") {
  std::vector<std::vector<double>> a{{0, 0}, {1, 0}};
  std::vector<std::vector<double>> b{{0, 1}, {1, 1}};
  CHECK(frechet_distance_points(a, b) == doctest::Approx(1.0));
}

TEST_CASE("frechet distance is symmetric") {
  auto a = dataset_from({"C", "CO", "CCO"});
  auto b = dataset_from({"CC", "C=O", "c1ccccc1"});
  CHECK(frechet_distance(a, b) == doctest::Approx(frechet_distance(b, a)));
}

TEST_CASE("frechet DP matches the exhaustive coupling oracle") {
  Rng rng(23);
  for (int rep = 0; rep < 200; ++rep) {
    int m = rng.uniform_int(1, 6);
    int n = rng.uniform_int(1, 6);
    std::vector<std::vector<double>> a, b;
    for (int i = 0; i < m; ++i) a.push_back({rng.uniform(-3, 3), rng.uniform(-3, 3)});
    for (int j = 0; j < n; ++j) b.push_back({rng.uniform(-3, 3), rng.uniform(-3, 3)});
    CHECK(frechet_distance_points(a, b) ==
          doctest::Approx(frechet_exhaustive(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("frechet distance needs non-empty batches") {
  Dataset empty;
  CHECK_THROWS_AS(frechet_distance(empty, tiny_reference()), EmptyBatch);
}
