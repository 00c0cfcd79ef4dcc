#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qmgen/molgraph.hpp"
#include "qmgen/rng.hpp"
#include "qmgen/smiles.hpp"
#include "test_util.hpp"

using namespace qmgen;

namespace {

MolecularGraph single_atom(AtomType t) {
  MolecularGraph g;
  g.add_atom(t);
  return g;
}

MolecularGraph benzene() {
  MolecularGraph g;
  for (int i = 0; i < 6; ++i) g.add_atom(AtomType::C);
  for (int i = 0; i < 6; ++i) g.add_bond(i, (i + 1) % 6, BondType::Aromatic);
  return g;
}

}  // namespace

TEST_CASE("encode pads a single carbon") {
  auto enc = encode(single_atom(AtomType::C), GraphSpec::qm9());
  CHECK(enc.feat(0, 0, static_cast<int>(AtomType::C)) == 1.0);
  for (int i = 1; i < 9; ++i) {
    CHECK(enc.feat(0, i, static_cast<int>(AtomType::Pad)) == 1.0);
  }
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) {
      CHECK(enc.adj(0, i, j, static_cast<int>(BondType::None)) == 1.0);
    }
  }
  CHECK(enc.check_invariants());
}

TEST_CASE("encode writes symmetric adjacency for C-O") {
  MolecularGraph g;
  g.add_atom(AtomType::C);
  g.add_atom(AtomType::O);
  g.add_bond(0, 1, BondType::Single);
  auto enc = encode(g, GraphSpec::qm9());
  CHECK(enc.adj(0, 0, 1, static_cast<int>(BondType::Single)) == 1.0);
  CHECK(enc.adj(0, 1, 0, static_cast<int>(BondType::Single)) == 1.0);
}

TEST_CASE("encode adjacency is bitwise symmetric on random graphs") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    auto g = test_util::random_valid_graph(rng);
    auto enc = encode(g, GraphSpec::qm9());
    for (int i = 0; i < enc.n; ++i) {
      for (int j = 0; j < enc.n; ++j) {
        for (int c = 0; c < enc.y; ++c) {
          CHECK(enc.adj(0, i, j, c) == enc.adj(0, j, i, c));
        }
      }
    }
  }
}

TEST_CASE("encode rejects oversized graphs") {
  MolecularGraph g;
  for (int i = 0; i < 10; ++i) g.add_atom(AtomType::C);
  CHECK_THROWS_AS(encode(g, GraphSpec::qm9()), CapacityExceeded);
}

TEST_CASE("encode then decode round-trips methanol") {
  auto g = parse_smiles("CO");
  auto decoded = discretize(encode(g, GraphSpec::qm9()));
  REQUIRE(decoded.size() == 1);
  CHECK(decoded[0] == g);
}

TEST_CASE("discretize breaks feature ties toward the lowest channel") {
  GraphSpec spec;
  DenseGraphBatch b(1, spec);
  for (int i = 0; i < spec.n_max; ++i) {
    b.feat(i == 0 ? 0 : 0, i, static_cast<int>(AtomType::Pad)) = 1.0;
    for (int j = 0; j < spec.n_max; ++j) b.adj(0, i, j, 0) = 1.0;
  }
  // slot 0: uniform-ish row whose max is shared by channels 0..3
  for (int c = 0; c < spec.n_atom_types; ++c) b.feat(0, 0, c) = 0.0;
  b.feat(0, 0, 0) = 0.2;
  b.feat(0, 0, 1) = 0.2;
  b.feat(0, 0, 2) = 0.2;
  b.feat(0, 0, 3) = 0.2;
  b.feat(0, 0, 4) = 0.1;
  b.feat(0, 0, 5) = 0.1;
  auto graphs = discretize(b);
  REQUIRE(graphs[0].size() == 1);
  CHECK(graphs[0].atom(0) == AtomType::C);
}

TEST_CASE("encode then discretize is the identity on random valid graphs") {
  Rng rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    auto g = test_util::random_valid_graph(rng);
    auto round = discretize(encode(g, GraphSpec::qm9()));
    REQUIRE(round.size() == 1);
    CHECK(round[0] == g);
  }
}

TEST_CASE("discretize is idempotent through re-encoding") {
  Rng rng(13);
  GraphSpec spec;
  for (int rep = 0; rep < 50; ++rep) {
    DenseGraphBatch b(2, spec);
    for (int s = 0; s < 2; ++s) {
      for (int i = 0; i < spec.n_max; ++i) {
        double row = 0.0;
        std::vector<double> vals(static_cast<std::size_t>(spec.n_atom_types));
        for (auto& v : vals) {
          v = rng.uniform();
          row += v;
        }
        for (int c = 0; c < spec.n_atom_types; ++c) b.feat(s, i, c) = vals[static_cast<std::size_t>(c)] / row;
        for (int j = 0; j < spec.n_max; ++j) {
          std::vector<double> fib(static_cast<std::size_t>(spec.n_bond_types));
          double tot = 0.0;
          for (auto& v : fib) {
            v = rng.uniform();
            tot += v;
          }
          for (int c = 0; c < spec.n_bond_types; ++c) {
            b.adj(s, i, j, c) = fib[static_cast<std::size_t>(c)] / tot;
            b.adj(s, j, i, c) = b.adj(s, i, j, c);
          }
        }
      }
    }
    auto first = discretize(b);
    for (const auto& g : first) {
      if (g.size() > spec.n_max) continue;
      auto again = discretize(encode(g, spec));
      CHECK(again[0] == g);
    }
  }
}

TEST_CASE("validity accepts methane and benzene, rejects over-valence") {
  CHECK(check_validity(single_atom(AtomType::C)));
  CHECK(check_validity(benzene()));

  MolecularGraph o_triple;
  o_triple.add_atom(AtomType::O);
  o_triple.add_atom(AtomType::C);
  o_triple.add_bond(0, 1, BondType::Triple);
  CHECK_FALSE(check_validity(o_triple));

  MolecularGraph empty;
  CHECK_FALSE(check_validity(empty));
}

TEST_CASE("validity rejects a lone aromatic bond") {
  MolecularGraph g;
  g.add_atom(AtomType::C);
  g.add_atom(AtomType::C);
  g.add_bond(0, 1, BondType::Aromatic);
  CHECK_FALSE(check_validity(g));
}

TEST_CASE("validity matches the brute-force oracle on all graphs up to 4 atoms") {
  const std::array<AtomType, 4> types{AtomType::C, AtomType::O, AtomType::N, AtomType::F};
  const std::array<BondType, 5> bonds{BondType::None, BondType::Single, BondType::Double,
                                      BondType::Triple, BondType::Aromatic};
  long checked = 0;
  for (int n = 1; n <= 4; ++n) {
    const int pairs = n * (n - 1) / 2;
    long type_combos = 1;
    for (int i = 0; i < n; ++i) type_combos *= 4;
    long bond_combos = 1;
    for (int i = 0; i < pairs; ++i) bond_combos *= 5;
    for (long tc = 0; tc < type_combos; ++tc) {
      for (long bc = 0; bc < bond_combos; ++bc) {
        MolecularGraph g;
        long t = tc;
        for (int i = 0; i < n; ++i) {
          g.add_atom(types[static_cast<std::size_t>(t % 4)]);
          t /= 4;
        }
        long bcode = bc;
        for (int i = 0; i < n; ++i) {
          for (int j = i + 1; j < n; ++j) {
            BondType bt = bonds[static_cast<std::size_t>(bcode % 5)];
            bcode /= 5;
            if (bt != BondType::None) g.add_bond(i, j, bt);
          }
        }
        CHECK(check_validity(g) == test_util::oracle_validity(g));
        ++checked;
      }
    }
  }
  CHECK(checked == 4L + 16 * 5 + 64 * 125 + 256 * 15625);
}

TEST_CASE("count_atoms_bonds basics") {
  MolecularGraph empty;
  auto [h0, hist0] = count_atoms_bonds(empty);
  CHECK(h0 == 0);
  CHECK(hist0 == std::array<int, 4>{0, 0, 0, 0});

  auto co = parse_smiles("C=O");
  auto [h1, hist1] = count_atoms_bonds(co);
  CHECK(h1 == 2);
  CHECK(hist1 == std::array<int, 4>{0, 1, 0, 0});

  auto [h2, hist2] = count_atoms_bonds(benzene());
  CHECK(h2 == 6);
  CHECK(hist2 == std::array<int, 4>{0, 0, 0, 6});
}

TEST_CASE("implicit hydrogens fill spare valence") {
  CHECK(implicit_hydrogens(single_atom(AtomType::C), 0) == 4);
  auto b = benzene();
  for (int i = 0; i < 6; ++i) CHECK(implicit_hydrogens(b, i) == 1);
  auto nitrile = parse_smiles("C#N");
  CHECK(implicit_hydrogens(nitrile, 0) == 1);
  CHECK(implicit_hydrogens(nitrile, 1) == 0);
}
