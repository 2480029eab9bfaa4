#include "cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "liesup/catalog.hpp"

namespace liesup::cli {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitInconclusive = 2;

struct CommonOptions {
  std::string entry;
  std::string entry_file;
  std::string catalog_dir;
  std::string rule;
  std::string integral;
  std::string json_path;
  std::string out_path;
  std::uint64_t seed = 20120917;
  int trials = 20;
  int samples = 40;
  int cap = 12;
  int depth = 5;
  int m_max = 3;
  std::vector<double> times;
  std::vector<std::string> box_overrides;
};

void add_common(CLI::App* sub, CommonOptions& opt, bool needs_entry = true) {
  auto* entry = sub->add_option("--entry", opt.entry, "catalog entry name");
  sub->add_option("--entry-file", opt.entry_file,
                  "JSON entry file (overrides --entry)");
  sub->add_option("--catalog-dir", opt.catalog_dir,
                  "directory searched for <entry>.json before the built-ins "
                  "(default: $LIESUP_CATALOG_DIR)");
  sub->add_option("--seed", opt.seed, "RNG seed");
  sub->add_option("--json", opt.json_path,
                  "write a JSON report to this path ('-' = stdout)");
  sub->add_option("--box", opt.box_overrides,
                  "per-symbol sampling override, e.g. x=0.5:1.5")
      ->expected(-1);
  if (needs_entry) entry->required();
}

CatalogEntry resolve_entry(const CommonOptions& opt) {
  CatalogEntry entry = opt.entry_file.empty()
                           ? find_entry(opt.entry, opt.catalog_dir)
                           : load_entry_file(opt.entry_file);
  for (const std::string& spec : opt.box_overrides) {
    auto eq = spec.find('=');
    auto colon = spec.find(':', eq == std::string::npos ? 0 : eq);
    if (eq == std::string::npos || colon == std::string::npos)
      throw std::runtime_error("bad --box override '" + spec +
                               "', expected sym=lo:hi");
    std::string sym = spec.substr(0, eq);
    double lo = std::stod(spec.substr(eq + 1, colon - eq - 1));
    double hi = std::stod(spec.substr(colon + 1));
    entry.trial.box[sym] = Interval{lo, hi};
  }
  return entry;
}

std::vector<double> effective_times(const CommonOptions& opt,
                                    const CatalogEntry& entry) {
  if (!opt.times.empty()) return opt.times;
  if (!entry.trial.times.empty()) return entry.trial.times;
  return {0.0, 0.4, 0.8, 1.2};
}

ClosureOptions closure_options(const CommonOptions& opt,
                               const CatalogEntry& entry) {
  ClosureOptions co;
  co.cap = opt.cap;
  co.max_depth = opt.depth;
  co.sampling.box = entry.trial.box;
  co.sampling.seed = opt.seed;
  return co;
}

void emit_report(const CommonOptions& opt, std::ostream& out,
                 const std::string& command, const CatalogEntry* entry,
                 const std::string& verdict, int trials, json tolerances,
                 json details) {
  if (opt.json_path.empty()) return;
  json report;
  report["command"] = command;
  report["entry"] = entry ? entry->name : "";
  report["notes"] = entry ? entry->notes : "";
  report["verdict"] = verdict;
  report["trials"] = trials;
  report["seed"] = opt.seed;
  report["tolerances"] = std::move(tolerances);
  report["version"] = kVersion;
  if (!details.is_null()) report["details"] = std::move(details);
  std::string text = report.dump(2) + "\n";
  if (opt.json_path == "-") {
    out << text;
  } else {
    std::ofstream file(opt.json_path);
    if (!file)
      throw std::runtime_error("cannot write report to '" + opt.json_path +
                               "'");
    file << text;
  }
}

std::string field_to_string(const VectorField& field) {
  std::ostringstream os;
  for (std::size_t i = 0; i < field.coordinates.size(); ++i) {
    if (i) os << ", ";
    os << "d" << field.coordinates[i] << "/dt = "
       << to_string(field.components[i]);
  }
  return os.str();
}

int cmd_catalog(const CommonOptions& opt, std::ostream& out) {
  if (!opt.entry.empty() || !opt.entry_file.empty()) {
    CatalogEntry entry = resolve_entry(opt);
    out << entry.name << ": " << entry.title << "\n";
    if (!entry.notes.empty()) out << "  " << entry.notes << "\n";
    out << "  order " << system_order(entry.system) << ", states:";
    for (const auto& s : state_names(entry.system)) out << " " << s;
    out << "\n";
    const auto& forces = system_forces(entry.system);
    for (const Expr& f : forces) out << "  force: " << to_string(f) << "\n";
    for (std::size_t i = 0; i < entry.basis.size(); ++i)
      out << "  X" << i + 1 << ": " << field_to_string(entry.basis[i]) << "\n";
    for (const auto& rule : entry.rules)
      out << "  rule '" << rule.label << "' (m=" << rule.copies
          << (rule.partial ? ", partial" : "") << ")\n";
    for (const auto& integral : entry.integrals)
      out << "  integral '" << integral.name << "' on " << integral.copies
          << " copies: " << to_string(integral.expression) << "\n";
    emit_report(opt, out, "catalog", &entry, "ok", 0, json::object(),
                json::object());
    return kExitPass;
  }
  json names = json::array();
  for (const auto& name : builtin_catalog()) {
    CatalogEntry entry = load_builtin(name);
    out << name << ": " << entry.title << "\n";
    names.push_back(name);
  }
  emit_report(opt, out, "catalog", nullptr, "ok", 0, json::object(),
              json{{"entries", names}});
  return kExitPass;
}

int cmd_bracket(const CommonOptions& opt, int i, int j, std::ostream& out) {
  CatalogEntry entry = resolve_entry(opt);
  if (i < 1 || j < 1 || i > static_cast<int>(entry.basis.size()) ||
      j > static_cast<int>(entry.basis.size()))
    throw std::runtime_error("field indices must be in 1..basis size");
  VectorField bracket = lie_bracket(entry.basis[i - 1], entry.basis[j - 1]);
  out << "[X" << i << ", X" << j << "] = " << field_to_string(bracket) << "\n";

  SampleOptions so;
  so.box = entry.trial.box;
  so.seed = opt.seed;
  SpanFit fit = span_membership(bracket, entry.basis, so);
  json coeffs = json::array();
  if (fit.in_span(1e-7)) {
    out << "in span of the basis, coefficients:";
    for (double c : fit.coefficients) {
      out << " " << c;
      coeffs.push_back(c);
    }
    out << " (residual " << fit.residual << ")\n";
  } else {
    out << "not resolved inside the basis span (residual " << fit.residual
        << ")\n";
  }
  emit_report(opt, out, "bracket", &entry, "ok", 0,
              json{{"membership", 1e-7}},
              json{{"i", i},
                   {"j", j},
                   {"components", field_to_string(bracket)},
                   {"coefficients", coeffs},
                   {"residual", fit.residual}});
  return kExitPass;
}

int cmd_closure(const CommonOptions& opt, std::ostream& out) {
  CatalogEntry entry = resolve_entry(opt);
  ClosureOptions co = closure_options(opt, entry);
  std::vector<VectorField> generators = entry.basis;
  if (generators.empty()) {
    TimeDepVectorField lift = lifted_field(entry);
    for (double t : effective_times(opt, entry))
      generators.push_back(freeze_time(lift, t));
  }
  ClosureResult result = lie_closure(generators, co);
  std::string verdict;
  int code;
  switch (result.status) {
    case ClosureResult::Status::Closed:
      verdict = "closed";
      code = kExitPass;
      out << "closure dimension " << result.dimension << "\n";
      break;
    case ClosureResult::Status::Exceeded:
      verdict = "exceeded";
      code = kExitFail;
      out << "no closure within cap " << co.cap << " / depth " << co.max_depth
          << " (" << result.detail << ")\n";
      break;
    default:
      verdict = "inconclusive";
      code = kExitInconclusive;
      out << "inconclusive: " << result.detail << "\n";
  }
  emit_report(opt, out, "closure", &entry, verdict, 0,
              json{{"membership", co.membership_tol}},
              json{{"dimension", result.dimension},
                   {"cap", co.cap},
                   {"depth", co.max_depth},
                   {"depth_reached", result.depth_reached}});
  return code;
}

int lie_verdict(const LieCheckResult& result, const CommonOptions& opt,
                const CatalogEntry& entry, const std::string& command,
                std::ostream& out) {
  std::string verdict;
  int code;
  switch (result.verdict) {
    case LieCheckResult::Verdict::LieSystem:
      verdict = "lie-system";
      code = kExitPass;
      out << "Lie system: Vessiot-Guldberg algebra of dimension "
          << result.closure.dimension << ", worst membership residual "
          << result.worst_membership_residual << "\n";
      break;
    case LieCheckResult::Verdict::NoEvidence:
      verdict = "no-evidence";
      code = kExitFail;
      out << "no evidence of a finite-dimensional algebra: " << result.detail
          << "\n";
      break;
    default:
      verdict = "inconclusive";
      code = kExitInconclusive;
      out << "inconclusive: " << result.detail << "\n";
  }
  emit_report(opt, out, command, &entry, verdict, 0,
              json{{"membership", 1e-7}},
              json{{"dimension", result.closure.dimension},
                   {"worst_membership_residual",
                    result.worst_membership_residual},
                   {"decomposition_checked", result.decomposition_checked}});
  return code;
}

int cmd_lie_check(const CommonOptions& opt, std::ostream& out) {
  CatalogEntry entry = resolve_entry(opt);
  ClosureOptions co = closure_options(opt, entry);
  LieCheckResult result = lie_scheffers_check(
      lifted_field(entry), effective_times(opt, entry), co);
  return lie_verdict(result, opt, entry, "lie-check", out);
}

int cmd_sode_check(const CommonOptions& opt, std::ostream& out) {
  CatalogEntry entry = resolve_entry(opt);
  ClosureOptions co = closure_options(opt, entry);
  std::vector<TimeDepTerm> terms;
  for (std::size_t i = 0; i < entry.basis.size(); ++i)
    if (!entry.coefficients.empty())
      terms.push_back({entry.coefficients[i], entry.basis[i]});
  LieCheckResult result = is_sode_lie_system(
      entry.system, terms, effective_times(opt, entry), co);
  return lie_verdict(result, opt, entry, "sode-check", out);
}

int cmd_min_m(const CommonOptions& opt, std::ostream& out) {
  CatalogEntry entry = resolve_entry(opt);
  if (entry.basis.empty())
    throw std::runtime_error("entry has no basis fields");
  SampleOptions so;
  so.box = entry.trial.box;
  so.seed = opt.seed;
  auto m = minimal_prolongation_count(entry.basis, opt.m_max, so);
  json details{{"m_max", opt.m_max}};
  std::string verdict;
  int code;
  if (m) {
    out << "minimal prolongation count m = " << *m << "\n";
    details["m"] = *m;
    verdict = "found";
    code = kExitPass;
  } else {
    out << "fields remain dependent up to m = " << opt.m_max << "\n";
    verdict = "not-found";
    code = kExitFail;
  }
  emit_report(opt, out, "min-m", &entry, verdict, 0, json::object(), details);
  return code;
}

const SuperpositionRule* pick_rule(const CatalogEntry& entry,
                                   const std::string& label) {
  for (const auto& rule : entry.rules)
    if (rule.label == label) return &rule;
  return nullptr;
}

int cmd_verify_sr(const CommonOptions& opt, std::ostream& out) {
  CatalogEntry entry = resolve_entry(opt);
  std::vector<const SuperpositionRule*> rules;
  if (!opt.rule.empty()) {
    const SuperpositionRule* rule = pick_rule(entry, opt.rule);
    if (!rule) throw std::runtime_error("unknown rule '" + opt.rule + "'");
    rules.push_back(rule);
  } else {
    for (const auto& rule : entry.rules) rules.push_back(&rule);
  }
  if (rules.empty())
    throw std::runtime_error("entry '" + entry.name + "' has no rules");

  VerifyOptions vo;
  vo.trials = opt.trials;
  vo.seed = opt.seed;

  bool all_pass = true;
  bool exhausted = false;
  json per_rule = json::array();
  for (const SuperpositionRule* rule : rules) {
    SrVerification result = verify_superposition(
        entry.system, *rule, entry.integrals, entry.trial, vo);
    all_pass = all_pass && result.passed;
    for (const auto& trial : result.trials)
      if (!trial.detail.empty()) exhausted = true;
    out << "rule '" << rule->label << "': "
        << (result.passed ? "pass" : "FAIL") << " (" << result.trials_run
        << " trials, max reconstruction error " << result.max_recon_error
        << ", max integral drift " << result.max_drift << ")\n";
    per_rule.push_back(json{{"rule", rule->label},
                            {"passed", result.passed},
                            {"max_recon_error", result.max_recon_error},
                            {"max_drift", result.max_drift}});
  }
  std::string verdict = all_pass ? "pass" : exhausted ? "inconclusive" : "fail";
  emit_report(opt, out, "verify-sr", &entry, verdict, opt.trials,
              json{{"reconstruction", 1e-6}, {"drift", 1e-7}, {"fit", 1e-9}},
              json{{"rules", per_rule}});
  return all_pass ? kExitPass : exhausted ? kExitInconclusive : kExitFail;
}

int cmd_conserve(const CommonOptions& opt, std::ostream& out) {
  CatalogEntry entry = resolve_entry(opt);
  std::vector<const FirstIntegral*> integrals;
  for (const auto& integral : entry.integrals)
    if (opt.integral.empty() || integral.name == opt.integral)
      integrals.push_back(&integral);
  if (integrals.empty())
    throw std::runtime_error("no matching first integrals in entry '" +
                             entry.name + "'");

  VerifyOptions vo;
  vo.trials = opt.trials;
  vo.seed = opt.seed;

  bool all_pass = true;
  json per_integral = json::array();
  for (const FirstIntegral* integral : integrals) {
    ConservationReport report = check_first_integral_conservation(
        entry.system, *integral, entry.trial, vo);
    all_pass = all_pass && report.passed;
    out << "integral '" << integral->name << "': "
        << (report.passed ? "conserved" : "NOT conserved") << " (max drift "
        << report.max_drift << " over " << report.trials_run << " trials)\n";
    json item{{"integral", integral->name},
              {"passed", report.passed},
              {"max_drift", report.max_drift}};
    if (!integral->time_dependent) {
      ZeroVerdict xd = check_XD_annihilates(entry.system, *integral,
                                            entry.trial.box);
      out << "  X_D annihilation zero-test: "
          << (xd.is_zero() ? "zero" : "nonzero") << "\n";
      item["xd_annihilates"] = xd.is_zero();
    }
    per_integral.push_back(std::move(item));
  }
  emit_report(opt, out, "conserve", &entry, all_pass ? "pass" : "fail",
              opt.trials, json{{"drift", 1e-7}},
              json{{"integrals", per_integral}});
  return all_pass ? kExitPass : kExitFail;
}

int cmd_char_residual(const CommonOptions& opt, std::ostream& out) {
  CatalogEntry entry = resolve_entry(opt);
  std::vector<const SuperpositionRule*> rules;
  if (!opt.rule.empty()) {
    const SuperpositionRule* rule = pick_rule(entry, opt.rule);
    if (!rule) throw std::runtime_error("unknown rule '" + opt.rule + "'");
    rules.push_back(rule);
  } else {
    for (const auto& rule : entry.rules) rules.push_back(&rule);
  }
  if (rules.empty())
    throw std::runtime_error("entry '" + entry.name + "' has no rules");

  CharOptions co;
  co.samples = opt.samples;
  co.seed = opt.seed;

  bool all_pass = true;
  bool inconclusive = false;
  json per_rule = json::array();
  for (const SuperpositionRule* rule : rules) {
    CharReport report =
        char_residual(entry.system, *rule, entry.integrals, entry.trial, co);
    if (report.samples_used == 0) inconclusive = true;
    all_pass = all_pass && report.passed;
    out << "rule '" << rule->label << "': max characteristic residual "
        << report.max_residual << " over " << report.samples_used
        << " samples -> " << (report.passed ? "pass" : "FAIL") << "\n";
    per_rule.push_back(json{{"rule", rule->label},
                            {"passed", report.passed},
                            {"max_residual", report.max_residual},
                            {"samples", report.samples_used}});
  }
  std::string verdict =
      all_pass ? "pass" : inconclusive ? "inconclusive" : "fail";
  emit_report(opt, out, "char-residual", &entry, verdict, opt.samples,
              json{{"residual", 1e-8}}, json{{"rules", per_rule}});
  return all_pass ? kExitPass
                  : inconclusive ? kExitInconclusive : kExitFail;
}

int cmd_emit_plot(const CommonOptions& opt, std::ostream& out) {
  CatalogEntry entry = resolve_entry(opt);
  const SuperpositionRule* rule = nullptr;
  if (!opt.rule.empty()) {
    rule = pick_rule(entry, opt.rule);
    if (!rule) throw std::runtime_error("unknown rule '" + opt.rule + "'");
  } else if (!entry.rules.empty()) {
    rule = &entry.rules.front();
  } else {
    throw std::runtime_error("entry '" + entry.name + "' has no rules");
  }

  VerifyOptions vo;
  vo.seed = opt.seed;
  PlotSeries series =
      sample_reconstruction(entry.system, *rule, entry.trial, vo);
  if (!series.ok) {
    out << "could not produce a reconstruction: " << series.detail << "\n";
    return kExitInconclusive;
  }

  std::ostringstream csv;
  csv << "t,reference,reconstructed,abs_error\n";
  csv << std::setprecision(15);
  for (std::size_t i = 0; i < series.times.size(); ++i)
    csv << series.times[i] << "," << series.reference[i] << ","
        << series.reconstructed[i] << ","
        << std::abs(series.reconstructed[i] - series.reference[i]) << "\n";
  if (opt.out_path.empty() || opt.out_path == "-") {
    out << csv.str();
  } else {
    std::ofstream file(opt.out_path);
    if (!file)
      throw std::runtime_error("cannot write '" + opt.out_path + "'");
    file << csv.str();
    out << "wrote " << series.times.size() << " samples to " << opt.out_path
        << " (rule '" << rule->label << "', branch " << series.branch << ")\n";
  }
  emit_report(opt, out, "emit-plot", &entry, "ok", 1, json::object(),
              json{{"rule", rule->label}, {"branch", series.branch}});
  return kExitPass;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Lie systems, prolongations and superposition rules"};
  app.require_subcommand(1);

  CommonOptions opt;
  int bracket_i = 1, bracket_j = 2;

  auto* catalog = app.add_subcommand("catalog", "list or describe entries");
  add_common(catalog, opt, /*needs_entry=*/false);

  auto* bracket = app.add_subcommand("bracket",
                                     "Lie bracket of two basis fields");
  add_common(bracket, opt);
  bracket->add_option("-i", bracket_i, "first field (1-based)");
  bracket->add_option("-j", bracket_j, "second field (1-based)");

  auto* closure = app.add_subcommand("closure", "Lie closure of the basis");
  add_common(closure, opt);
  closure->add_option("--cap", opt.cap, "dimension cap");
  closure->add_option("--depth", opt.depth, "bracket depth bound");
  closure->add_option("--times", opt.times, "freeze times")->expected(-1);

  auto* lie_check = app.add_subcommand("lie-check",
                                       "Lie-Scheffers test of the lift");
  add_common(lie_check, opt);
  lie_check->add_option("--cap", opt.cap, "dimension cap");
  lie_check->add_option("--depth", opt.depth, "bracket depth bound");
  lie_check->add_option("--times", opt.times, "freeze times")->expected(-1);

  auto* sode_check = app.add_subcommand(
      "sode-check", "Lie-Scheffers test through the declared decomposition");
  add_common(sode_check, opt);
  sode_check->add_option("--cap", opt.cap, "dimension cap");
  sode_check->add_option("--depth", opt.depth, "bracket depth bound");
  sode_check->add_option("--times", opt.times, "freeze times")->expected(-1);

  auto* min_m = app.add_subcommand(
      "min-m", "minimal number of diagonal prolongation copies");
  add_common(min_m, opt);
  min_m->add_option("--max", opt.m_max, "largest m to try");

  auto* verify = app.add_subcommand("verify-sr",
                                    "verify superposition rules numerically");
  add_common(verify, opt);
  verify->add_option("--rule", opt.rule, "rule label (default: all)");
  verify->add_option("--trials", opt.trials, "number of trials");

  auto* conserve = app.add_subcommand("conserve",
                                      "first-integral conservation check");
  add_common(conserve, opt);
  conserve->add_option("--integral", opt.integral,
                       "integral name (default: all)");
  conserve->add_option("--trials", opt.trials, "number of trials");

  auto* char_res = app.add_subcommand(
      "char-residual", "characteristic-system residual of a rule");
  add_common(char_res, opt);
  char_res->add_option("--rule", opt.rule, "rule label (default: all)");
  char_res->add_option("--samples", opt.samples, "sample count");

  auto* plot = app.add_subcommand("emit-plot",
                                  "CSV of one reconstruction trial");
  add_common(plot, opt);
  plot->add_option("--rule", opt.rule, "rule label (default: first)");
  plot->add_option("--out", opt.out_path, "output CSV path ('-' = stdout)");

  std::vector<const char*> argv;
  argv.push_back("liesup");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitInconclusive;
  }

  try {
    if (catalog->parsed()) return cmd_catalog(opt, out);
    if (bracket->parsed()) return cmd_bracket(opt, bracket_i, bracket_j, out);
    if (closure->parsed()) return cmd_closure(opt, out);
    if (lie_check->parsed()) return cmd_lie_check(opt, out);
    if (sode_check->parsed()) return cmd_sode_check(opt, out);
    if (min_m->parsed()) return cmd_min_m(opt, out);
    if (verify->parsed()) return cmd_verify_sr(opt, out);
    if (conserve->parsed()) return cmd_conserve(opt, out);
    if (char_res->parsed()) return cmd_char_residual(opt, out);
    if (plot->parsed()) return cmd_emit_plot(opt, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInconclusive;
  }
  return kExitInconclusive;
}

}  // namespace liesup::cli
