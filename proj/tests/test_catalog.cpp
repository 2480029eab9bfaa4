#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "liesup/catalog.hpp"

using namespace liesup;

namespace {

const char* kCustomEntry = R"json({
  "name": "decay",
  "title": "x'' = -x'",
  "notes": "constant-coefficient linear test entry",
  "system": {
    "kind": "sode",
    "states": ["x"], "velocities": ["v"],
    "forces": ["0-v"]
  },
  "basis": {
    "fields": [{"x": "v", "v": "0-v"}],
    "coefficients": ["1"],
    "expected_dimension": 1
  },
  "rules": [
    {
      "label": "shift",
      "kind": "partial",
      "copies": 1,
      "constants": ["k1"],
      "branches": [["x_(1)+k1"]]
    }
  ],
  "trial": {"t_end": 1.0, "box": {"x": [0.3, 2.0], "v": [0.3, 2.0]}}
})json";

}  // namespace

TEST_CASE("the built-in catalog covers the worked examples") {
  auto names = builtin_catalog();
  CHECK(names.size() >= 9);
  for (const char* expected :
       {"free", "tv2", "t2v", "t2", "oscillator", "mp", "dmp", "ks2", "ks3"})
    CHECK(std::find(names.begin(), names.end(), expected) != names.end());
}

TEST_CASE("entries load with substituted parameters") {
  CatalogEntry ks2 = load_builtin("ks2");
  CHECK(ks2.parameters.at("b0") == -1.0);
  // Parameters are already substituted: no free b0 anywhere.
  CHECK_FALSE(depends_on(system_forces(ks2.system)[0], "b0"));
  for (const auto& field : ks2.basis)
    for (const auto& c : field.components) CHECK_FALSE(depends_on(c, "b0"));
  CHECK(ks2.expected_dimension == std::optional<int>{3});
  REQUIRE(ks2.rules.size() == 1);
  CHECK(ks2.rules.front().copies == 2);
  CHECK(ks2.rules.front().branches.size() == 2);  // the two signs
}

TEST_CASE("the KS-2 notes settle the discriminant exponent") {
  CatalogEntry ks2 = load_builtin("ks2");
  CHECK(ks2.notes.find("Gamma^2") != std::string::npos);
  CHECK(ks2.notes.find("Gamma^3") != std::string::npos);
}

TEST_CASE("Table 1 row 3 ships the documented rule") {
  CatalogEntry t2v = load_builtin("t2v");
  bool found = false;
  for (const auto& rule : t2v.rules)
    if (rule.label == "table1-row3") {
      found = true;
      Expr expected = Expr::symbol("k1") * Expr::symbol("x_(1)") +
                      Expr::symbol("k2");
      std::vector<Expr> diff{rule.branches.front().components[0] - expected};
      CHECK(probably_zero(std::span<const Expr>(diff), Box{}).is_zero());
    }
  CHECK(found);
}

TEST_CASE("row 2 has no general rule, only the partial shift") {
  CatalogEntry tv2 = load_builtin("tv2");
  CHECK(tv2.basis.empty());
  for (const auto& rule : tv2.rules) CHECK(rule.partial);
}

TEST_CASE("the lifted field carries the declared decomposition") {
  for (const char* name : {"free", "t2v", "t2", "oscillator", "mp", "ks2",
                           "ks3"}) {
    CatalogEntry entry = load_builtin(name);
    TimeDepVectorField lift = lifted_field(entry);
    CAPTURE(name);
    CHECK(lift.has_decomposition());
    CHECK(lift.decomposition.size() == entry.basis.size());
  }
  CatalogEntry dmp = load_builtin("dmp");
  CHECK_FALSE(lifted_field(dmp).has_decomposition());
}

TEST_CASE("unknown entries raise a distinct error") {
  CHECK_THROWS_AS(load_builtin("nope"), std::runtime_error);
  CHECK_THROWS_AS(find_entry("nope"), std::runtime_error);
}

TEST_CASE("entry files load with the built-in schema") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "liesup-catalog-test";
  fs::create_directories(dir);
  fs::path file = dir / "decay.json";
  {
    std::ofstream out(file);
    out << kCustomEntry;
  }

  CatalogEntry direct = load_entry_file(file.string());
  CHECK(direct.name == "decay");
  CHECK(direct.rules.size() == 1);
  CHECK(direct.rules.front().partial);

  // Directory lookup prefers the file over (absent) built-ins.
  CatalogEntry via_dir = find_entry("decay", dir.string());
  CHECK(via_dir.title == direct.title);

  // The environment variable supplies the default directory.
  setenv("LIESUP_CATALOG_DIR", dir.string().c_str(), 1);
  CatalogEntry via_env = find_entry("decay");
  CHECK(via_env.name == "decay");
  unsetenv("LIESUP_CATALOG_DIR");

  // A file shadowing a built-in name wins over the built-in.
  fs::path shadow = dir / "free.json";
  {
    std::string text = kCustomEntry;
    text.replace(text.find("\"decay\""), 7, "\"free\"");
    std::ofstream out(shadow);
    out << text;
  }
  CatalogEntry shadowed = find_entry("free", dir.string());
  CHECK(shadowed.title == direct.title);
  fs::remove_all(dir);
}

TEST_CASE("malformed entry files are rejected") {
  CHECK_THROWS(parse_entry_json("not json"));
  CHECK_THROWS(parse_entry_json(R"({"name": "x"})"));  // missing system
  CHECK_THROWS(load_entry_file("/nonexistent/entry.json"));
}
