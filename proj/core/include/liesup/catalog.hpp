#pragma once

// Built-in catalog of systems with known Vessiot-Guldberg decompositions,
// superposition rules and first integrals, plus a JSON loader that accepts
// user entry files in the same schema.

#include <string>
#include <utility>
#include <vector>

#include "liesup/sode.hpp"
#include "liesup/srules.hpp"

namespace liesup {

struct CatalogEntry {
  std::string name;
  std::string title;
  std::string notes;
  AnySystem system;
  std::vector<VectorField> basis;   // candidate Vessiot-Guldberg generators
  std::vector<Expr> coefficients;   // b_i(t); empty when no decomposition
  std::optional<int> expected_dimension;
  std::vector<std::pair<std::string, VectorField>> extra_fields;
  std::vector<SuperpositionRule> rules;
  std::vector<FirstIntegral> integrals;
  TrialConfig trial;
  Env parameters;  // values already substituted into all expressions
};

// Names of the built-in entries, in catalog order.
std::vector<std::string> builtin_catalog();

CatalogEntry load_builtin(const std::string& name);

// Parses an entry file (same schema as the built-ins).
CatalogEntry load_entry_file(const std::string& path);
CatalogEntry parse_entry_json(const std::string& text);

// Lookup order: `<catalog_dir>/<name>.json` when a directory is given (the
// LIESUP_CATALOG_DIR environment variable supplies the default), then the
// built-ins. Throws std::runtime_error when the entry is unknown.
CatalogEntry find_entry(const std::string& name,
                        const std::string& catalog_dir = "");

// First-order lift with the entry's decomposition attached (when present).
TimeDepVectorField lifted_field(const CatalogEntry& entry);

}  // namespace liesup
