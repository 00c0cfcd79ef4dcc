#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qmgen/rng.hpp"
#include "qmgen/smiles.hpp"
#include "test_util.hpp"

using namespace qmgen;

TEST_CASE("parse CO gives one single bond") {
  auto g = parse_smiles("CO");
  REQUIRE(g.size() == 2);
  CHECK(g.atom(0) == AtomType::C);
  CHECK(g.atom(1) == AtomType::O);
  CHECK(g.bond(0, 1) == BondType::Single);
}

TEST_CASE("parse C#N gives a triple bond") {
  auto g = parse_smiles("C#N");
  REQUIRE(g.size() == 2);
  CHECK(g.bond(0, 1) == BondType::Triple);
}

TEST_CASE("parse branches and double bonds") {
  auto g = parse_smiles("CC(=O)O");  // acetic acid
  REQUIRE(g.size() == 4);
  CHECK(g.bond(0, 1) == BondType::Single);
  CHECK(g.bond(1, 2) == BondType::Double);
  CHECK(g.bond(1, 3) == BondType::Single);
  CHECK(g.bond(2, 3) == BondType::None);
}

TEST_CASE("parse aromatic ring") {
  auto g = parse_smiles("c1ccccc1");
  REQUIRE(g.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(g.bond(i, (i + 1) % 6) == BondType::Aromatic);
  }
  CHECK(check_validity(g));
}

TEST_CASE("parse errors are typed") {
  CHECK_THROWS_AS(parse_smiles("C(("), SmilesError);
  CHECK_THROWS_AS(parse_smiles("C)C"), SmilesError);
  CHECK_THROWS_AS(parse_smiles("C1CC"), SmilesError);
  CHECK_THROWS_AS(parse_smiles("[CH4]"), SmilesError);
  CHECK_THROWS_AS(parse_smiles("C%11CC%11"), SmilesError);
  CHECK_THROWS_AS(parse_smiles("CCCCCCCCCC"), SmilesError);
  CHECK_THROWS_AS(parse_smiles(""), SmilesError);

  try {
    parse_smiles("C((");
  } catch (const SmilesError& e) {
    CHECK(e.kind == SmilesError::Kind::UnbalancedBranch);
  }
  try {
    parse_smiles("CCCCCCCCCC");
  } catch (const SmilesError& e) {
    CHECK(e.kind == SmilesError::Kind::CapacityExceeded);
  }
  try {
    parse_smiles("C1CC");
  } catch (const SmilesError& e) {
    CHECK(e.kind == SmilesError::Kind::UnclosedRing);
  }
}

TEST_CASE("parser survives arbitrary byte soup") {
  Rng rng(99);
  for (int rep = 0; rep < 2000; ++rep) {
    std::string s;
    int len = rng.uniform_int(0, 24);
    for (int i = 0; i < len; ++i) {
      s += static_cast<char>(rng.uniform_int(32, 126));
    }
    try {
      auto g = parse_smiles(s);
      CHECK(g.size() >= 1);
      CHECK(g.size() <= 9);
    } catch (const SmilesError&) {
      // typed failure is the expected path
    }
  }
}

TEST_CASE("write single carbon and C-O") {
  MolecularGraph c;
  c.add_atom(AtomType::C);
  CHECK(write_smiles(c) == "C");

  MolecularGraph co;
  co.add_atom(AtomType::C);
  co.add_atom(AtomType::O);
  co.add_bond(0, 1, BondType::Single);
  CHECK(write_smiles(co) == "CO");
}

TEST_CASE("write benzene round-trips") {
  auto g = parse_smiles("c1ccccc1");
  auto s = write_smiles(g);
  auto h = parse_smiles(s);
  CHECK(test_util::graphs_isomorphic(g, h));
}

TEST_CASE("writer rejects invalid graphs") {
  MolecularGraph g;
  g.add_atom(AtomType::O);
  g.add_atom(AtomType::C);
  g.add_bond(0, 1, BondType::Triple);
  CHECK_THROWS_AS(write_smiles(g), InvalidGraph);
}

TEST_CASE("disconnected fragments round-trip through a dot") {
  MolecularGraph g;
  g.add_atom(AtomType::C);
  g.add_atom(AtomType::O);
  g.add_atom(AtomType::C);
  g.add_bond(0, 1, BondType::Single);
  auto s = write_smiles(g);
  CHECK(s.find('.') != std::string::npos);
  auto h = parse_smiles(s);
  CHECK(test_util::graphs_isomorphic(g, h));
}

TEST_CASE("parse-write round-trip on random valid graphs") {
  Rng rng(4242);
  int done = 0;
  for (int rep = 0; rep < 300; ++rep) {
    auto g = test_util::random_valid_graph(rng);
    REQUIRE(check_validity(g));
    std::string s = write_smiles(g);
    auto h = parse_smiles(s);
    CHECK(test_util::graphs_isomorphic(g, h));
    ++done;
  }
  CHECK(done == 300);
}

TEST_CASE("load_dataset filters and counts") {
  test_util::TempDir dir("smiles");

  SUBCASE("all usable") {
    auto p = test_util::write_lines(dir, "ok.smi", {"CO", "C#N"});
    auto ds = load_dataset(p, 10);
    CHECK(ds.size() == 2);
    CHECK(ds.skipped == 0);
    CHECK(ds.name == "ok");
  }

  SUBCASE("bad lines are skipped and counted") {
    auto p = test_util::write_lines(dir, "mixed.smi", {"CO", "xyz"});
    auto ds = load_dataset(p, 10);
    CHECK(ds.size() == 1);
    CHECK(ds.skipped == 1);
  }

  SUBCASE("comments and blanks are ignored") {
    auto p = test_util::write_lines(dir, "comments.smi", {"# header", "", "CO"});
    auto ds = load_dataset(p, 10);
    CHECK(ds.size() == 1);
    CHECK(ds.skipped == 0);
  }

  SUBCASE("limit caps the result") {
    auto p = test_util::write_lines(dir, "cap.smi", {"C", "N", "O", "CO"});
    auto ds = load_dataset(p, 2);
    CHECK(ds.size() == 2);
  }

  SUBCASE("missing file raises IoError") {
    CHECK_THROWS_AS(load_dataset(dir.file("nope.smi"), 5), IoError);
  }

  SUBCASE("nothing usable raises EmptyDataset") {
    auto p = test_util::write_lines(dir, "junk.smi", {"xyz", "[C]"});
    CHECK_THROWS_AS(load_dataset(p, 5), EmptyDataset);
  }
}
