#include "weakvar/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "weakvar/dynamics.hpp"
#include "weakvar/errors.hpp"
#include "weakvar/io.hpp"
#include "weakvar/parallel.hpp"
#include "weakvar/states.hpp"
#include "weakvar/verify.hpp"
#include "weakvar/weakstats.hpp"
#include "weakvar/wigner.hpp"

namespace weakvar::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using states::ModelKind;

constexpr const char* kSummarySchema = "weakvar.summary/1";

class VerificationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::map<ModelKind, std::set<std::string>>& model_parameters() {
  static const std::map<ModelKind, std::set<std::string>> params{
      {ModelKind::plane_wave, {"k"}},
      {ModelKind::gaussian_packet, {"mu", "sigma", "p0"}},
      {ModelKind::coherent_state, {"omega", "x0", "p0"}},
      {ModelKind::qho_eigenstate, {"n", "omega", "x0"}},
      {ModelKind::box_eigenstate, {"n", "L", "x0"}},
      {ModelKind::hydrogenic_radial, {"n", "alpha"}},
      {ModelKind::two_gaussian_superposition, {"mu", "separation", "sigma", "p0", "weight1", "weight2", "phase"}},
      {ModelKind::exponential_segment, {"a", "x0"}},
  };
  return params;
}

const std::set<std::string> kTopLevelKeys{"model", "input",    "grid",   "constants", "tolerances", "eta",
                                          "format", "eps_node", "method", "wigner",    "cumulants",  "evolve"};

// ---- config access ----

double number_at(const json& obj, const std::string& key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigurationError(where + "." + key + " is required");
  if (!it->is_number()) throw ConfigurationError(where + "." + key + " must be a number");
  return it->get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
  return obj.contains(key) ? number_at(obj, key, where) : fallback;
}

std::size_t count_or(const json& obj, const std::string& key, std::size_t fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const double v = number_at(obj, key, where);
  if (!(v >= 0.0) || v != std::floor(v)) throw ConfigurationError(where + "." + key + " must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

const json& object_at(const json& doc, const std::string& key) {
  static const json empty = json::object();
  const auto it = doc.find(key);
  if (it == doc.end()) return empty;
  if (!it->is_object()) throw ConfigurationError(key + " must be an object");
  return *it;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigurationError("unknown key " + where + "." + k);
}

// Applies key=value with a dotted key path; values parse as JSON when possible, else as strings.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigurationError("--set expects key=value, got '" + assignment + "'");
  std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  if (key.rfind("tol_", 0) == 0) key = "tolerances." + key;
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigurationError("empty component in --set key '" + key + "'");
    if (!node->is_object()) throw ConfigurationError("--set key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

// ---- resolved run settings ----

struct Settings {
  std::string command;
  json doc;
  fs::path base_dir;
  states::PhysicalConstants constants;
  verify::Tolerances tolerances;
  double tol_zero_relative = 1e-6;
  double tol_force_relative = 1e-6;
  std::optional<double> eta;
  bool json_format = false;
  weakstats::AnalysisOptions options;
};

Settings resolve(const std::string& command, json doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigurationError("config must be a JSON object");
  reject_unknown(doc, kTopLevelKeys, "config");
  Settings s;
  s.command = command;
  s.doc = doc;
  s.base_dir = base_dir;
  const bool has_model = doc.contains("model");
  const bool has_input = doc.contains("input");
  if (has_model == has_input) throw ConfigurationError("exactly one of 'model' or 'input' must be set");

  const auto& c = object_at(doc, "constants");
  reject_unknown(c, {"hbar", "mass"}, "constants");
  s.constants.hbar = number_or(c, "hbar", 1.0, "constants");
  s.constants.mass = number_or(c, "mass", 1.0, "constants");
  s.constants.validate();

  const auto& t = object_at(doc, "tolerances");
  reject_unknown(t,
                 {"tol_route", "tol_budget", "tol_riccati", "tol_identity", "tol_marginal", "tol_cumulant",
                  "tol_zero_relative", "tol_force_relative"},
                 "tolerances");
  s.tolerances.route = number_or(t, "tol_route", s.tolerances.route, "tolerances");
  s.tolerances.budget = number_or(t, "tol_budget", s.tolerances.budget, "tolerances");
  s.tolerances.riccati = number_or(t, "tol_riccati", s.tolerances.riccati, "tolerances");
  s.tolerances.identity = number_or(t, "tol_identity", s.tolerances.identity, "tolerances");
  s.tolerances.marginal = number_or(t, "tol_marginal", s.tolerances.marginal, "tolerances");
  s.tolerances.cumulant = number_or(t, "tol_cumulant", s.tolerances.cumulant, "tolerances");
  s.tol_zero_relative = number_or(t, "tol_zero_relative", s.tol_zero_relative, "tolerances");
  s.tol_force_relative = number_or(t, "tol_force_relative", s.tol_force_relative, "tolerances");
  s.tolerances.validate();
  if (!(s.tol_zero_relative > 0.0) || !(s.tol_force_relative > 0.0))
    throw ConfigurationError("tolerances must be positive and finite");

  if (doc.contains("eta")) s.eta = number_at(doc, "eta", "config");
  if (doc.contains("format")) {
    const auto& f = doc["format"];
    if (f == "json")
      s.json_format = true;
    else if (f != "csv")
      throw ConfigurationError("format must be 'csv' or 'json'");
  }
  if (doc.contains("eps_node")) {
    s.options.eps_node = number_at(doc, "eps_node", "config");
    if (!(*s.options.eps_node >= 0.0)) throw ConfigurationError("eps_node must be nonnegative");
  }
  if (doc.contains("method")) {
    const auto& m = doc["method"];
    if (m == "fd8")
      s.options.method = numerics::DiffMethod::fd8;
    else if (m == "fd4")
      s.options.method = numerics::DiffMethod::fd4;
    else if (m == "spectral")
      s.options.method = numerics::DiffMethod::spectral;
    else
      throw ConfigurationError("method must be 'fd8', 'fd4' or 'spectral'");
  }
  s.options.tol_zero_relative = s.tol_zero_relative;
  return s;
}

states::ModelSpec model_spec(const json& m) {
  if (!m.is_object()) throw ConfigurationError("model must be an object");
  if (!m.contains("kind") || !m["kind"].is_string()) throw ConfigurationError("model.kind is required");
  states::ModelSpec spec;
  spec.kind = states::parse_model_kind(m["kind"].get<std::string>());
  const auto& allowed = model_parameters().at(spec.kind);
  for (const auto& [k, v] : m.items()) {
    if (k == "kind") continue;
    if (!allowed.count(k)) throw ConfigurationError("unknown parameter model." + k + " for " + std::string(to_string(spec.kind)));
    if (!v.is_number()) throw ConfigurationError("model." + k + " must be a number");
    spec.parameters[k] = v.get<double>();
  }
  return spec;
}

states::WavefunctionGrid load_state(const Settings& s) {
  if (s.doc.contains("input")) {
    if (!s.doc["input"].is_string()) throw ConfigurationError("input must be a path string");
    fs::path p = s.doc["input"].get<std::string>();
    if (p.is_relative()) p = s.base_dir / p;
    return states::ingest(p, s.constants);
  }
  const auto& g = object_at(s.doc, "grid");
  reject_unknown(g, {"x_min", "x_max", "n"}, "grid");
  const numerics::Grid grid(number_or(g, "x_min", -20.0, "grid"), number_or(g, "x_max", 20.0, "grid"),
                            count_or(g, "n", 4096, "grid"));
  return states::build(model_spec(s.doc["model"]), grid, s.constants);
}

// ---- output helpers ----

std::string fmt(double v) { return io::format_double(v); }

json number(double v) { return std::isfinite(v) ? json(v) : json(fmt(v)); }

struct Outputs {
  fs::path prefix;
  fs::path path(const std::string& suffix) const { return fs::path(prefix.string() + "_" + suffix); }
  void write(const std::string& suffix, const std::string& content) const { io::write_atomic(path(suffix), content); }
  void write_json(const std::string& suffix, const json& j) const { write(suffix, j.dump(2) + "\n"); }
};

json constants_json(const states::PhysicalConstants& c) { return {{"hbar", c.hbar}, {"mass", c.mass}}; }

json grid_json(const numerics::Grid& g) {
  return {{"x_min", g.x_min()}, {"x_max", g.x_max()}, {"n", g.size()}, {"dx", g.dx()}};
}

json extrema(const numerics::RealField& f) {
  double lo = INFINITY, hi = -INFINITY;
  std::size_t count = 0;
  for (double v : f.values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++count;
  }
  if (count == 0) return {{"min", nullptr}, {"max", nullptr}, {"finite_samples", 0}};
  return {{"min", lo}, {"max", hi}, {"finite_samples", count}};
}

json budget_json(const weakstats::VarianceBudget& b) {
  return {{"total", number(b.total)},
          {"mean_weak", number(b.mean_weak)},
          {"var_of_weak_value", number(b.var_of_weak_value)},
          {"residual", number(b.residual)},
          {"fisher", number(b.fisher)}};
}

json verify_json(const verify::VerifyReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name},
                      {"status", c.skipped ? "skipped" : (c.passed ? "pass" : "fail")},
                      {"residual", number(c.residual)},
                      {"tolerance", c.tolerance}});
  return {{"overall", r.passed() ? "pass" : "fail"}, {"checks", checks}};
}

const std::vector<std::string>& field_columns() {
  static const std::vector<std::string> cols{"x",     "rho",          "S",        "p_weak_re", "p_weak_im",
                                             "V_logrho", "V_conditional", "V_weakvalues", "Q",  "kT",
                                             "P",     "riccati_residual", "sign_class"};
  return cols;
}

// One row of the field schema per grid point; the time column is prepended when t is given.
void write_field_rows(std::ostream& out, const weakstats::Analysis& a, const std::optional<double>& eta,
                      std::optional<double> t) {
  const auto& f = a.fields;
  const auto& g = a.polar.grid();
  std::optional<numerics::RealField> eta_field;
  if (eta) eta_field = weakstats::combine_with_eta(f.weak_momentum, *eta);
  const std::string ts = t ? fmt(*t) + "," : "";
  for (std::size_t j = 0; j < g.size(); ++j) {
    out << ts << fmt(g.x(j)) << ',' << fmt(a.polar.density[j]) << ',' << fmt(a.polar.phase[j]) << ','
        << fmt(f.weak_momentum.re[j]) << ',' << fmt(f.weak_momentum.im[j]) << ',' << fmt(f.V_logrho[j]) << ','
        << fmt(f.V_conditional[j]) << ',' << fmt(f.V_weakvalues[j]) << ',' << fmt(f.Q[j]) << ',' << fmt(f.kT[j])
        << ',' << fmt(f.P[j]) << ',' << fmt(f.riccati_residual[j]) << ',' << weakstats::to_string(f.signs.classes[j]);
    if (eta_field) out << ',' << fmt((*eta_field)[j]);
    out << '\n';
  }
}

std::string field_header(bool with_time, bool with_eta) {
  std::string h = with_time ? "t," : "";
  for (std::size_t i = 0; i < field_columns().size(); ++i) h += (i ? "," : "") + field_columns()[i];
  if (with_eta) h += ",p_weak_eta";
  return h + "\n";
}

json field_table_json(const weakstats::Analysis& a, const std::optional<double>& eta) {
  const auto& f = a.fields;
  const auto& g = a.polar.grid();
  auto col = [](const numerics::RealField& r) {
    json arr = json::array();
    for (double v : r.values) arr.push_back(number(v));
    return arr;
  };
  json j = json::object();
  j["x"] = g.points();
  j["rho"] = col(a.polar.density);
  j["S"] = col(a.polar.phase);
  j["p_weak_re"] = col(f.weak_momentum.re);
  j["p_weak_im"] = col(f.weak_momentum.im);
  j["V_logrho"] = col(f.V_logrho);
  j["V_conditional"] = col(f.V_conditional);
  j["V_weakvalues"] = col(f.V_weakvalues);
  j["Q"] = col(f.Q);
  j["kT"] = col(f.kT);
  j["P"] = col(f.P);
  j["riccati_residual"] = col(f.riccati_residual);
  json classes = json::array();
  for (auto c : f.signs.classes) classes.push_back(std::string(weakstats::to_string(c)));
  j["sign_class"] = classes;
  if (eta) j["p_weak_eta"] = col(weakstats::combine_with_eta(f.weak_momentum, *eta));
  return j;
}

json sign_histogram(const weakstats::SignClassification& s) {
  std::map<std::string, std::size_t> counts{
      {"positive", 0}, {"negative", 0}, {"zero_band", 0}, {"node_divergent", 0}, {"undefined", 0}};
  for (auto c : s.classes) ++counts[std::string(weakstats::to_string(c))];
  return counts;
}

json nodes_json(const std::vector<weakstats::NodeFit>& fits, const numerics::Grid& g) {
  json arr = json::array();
  for (const auto& n : fits)
    arr.push_back({{"x_begin", g.x(n.run_begin)},
                   {"x_end", g.x(n.run_end - 1)},
                   {"x0", number(n.x0)},
                   {"exponent", number(n.exponent)},
                   {"asymptote_coefficient", number(n.asymptote_coefficient)}});
  return arr;
}

json base_summary(const Settings& s, const states::WavefunctionGrid& state) {
  json j;
  j["schema"] = kSummarySchema;
  j["command"] = s.command;
  j["constants"] = constants_json(s.constants);
  j["grid"] = grid_json(state.grid());
  if (s.doc.contains("model"))
    j["source"] = {{"model", s.doc["model"]}};
  else
    j["source"] = {{"input", s.doc["input"]}};
  return j;
}

json analysis_summary(const weakstats::Analysis& a) {
  const auto& f = a.fields;
  std::size_t masked = 0;
  for (bool m : f.mask) masked += m ? 1 : 0;
  json j;
  j["momentum_variance"] = number(a.momentum_variance);
  j["budget"] = budget_json(a.budget);
  j["V_logrho"] = extrema(f.V_logrho);
  j["V_weakvalues"] = extrema(f.V_weakvalues);
  j["V_conditional"] = f.has_conditional ? extrema(f.V_conditional) : json(nullptr);
  j["masked_samples"] = masked;
  j["eps_node"] = a.polar.eps_node;
  j["tol_zero"] = f.signs.tol_zero;
  j["sign_classes"] = sign_histogram(f.signs);
  j["nodes"] = nodes_json(f.signs.nodes, a.polar.grid());
  if (a.wigner) j["wigner_min"] = a.wigner->min();
  return j;
}

weakstats::AnalysisOptions options_for(const Settings& s, bool with_wigner) {
  auto o = s.options;
  o.with_wigner = with_wigner;
  return o;
}

// ---- commands ----

int cmd_analyze(const Settings& s, const Outputs& out, std::ostream& log) {
  const auto state = load_state(s);
  const auto a = weakstats::analyze(state, options_for(s, true));
  if (s.json_format) {
    out.write_json("fields.json", field_table_json(a, s.eta));
  } else {
    std::ostringstream csv;
    csv << field_header(false, s.eta.has_value());
    write_field_rows(csv, a, s.eta, std::nullopt);
    out.write("fields.csv", csv.str());
  }
  auto summary = base_summary(s, state);
  summary.update(analysis_summary(a));
  if (s.eta) summary["eta"] = *s.eta;
  out.write_json("summary.json", summary);
  log << "analyze: budget residual " << fmt(a.budget.residual) << ", V_logrho in [" << summary["V_logrho"]["min"].dump()
      << ", " << summary["V_logrho"]["max"].dump() << "]\n";
  return kExitSuccess;
}

int cmd_wigner(const Settings& s, const Outputs& out, std::ostream& log) {
  const auto state = load_state(s);
  const auto wg = wigner::wigner_transform(state);
  const auto& w = object_at(s.doc, "wigner");
  reject_unknown(w, {"stride_x", "stride_p"}, "wigner");
  const std::size_t sx = count_or(w, "stride_x", 1, "wigner");
  const std::size_t sp = count_or(w, "stride_p", 1, "wigner");
  std::ostringstream csv;
  wigner::export_csv(wg, csv, sx, sp);
  out.write("wigner.csv", csv.str());
  double negative_volume = 0.0;
  for (double v : wg.W) negative_volume += std::min(v, 0.0);
  negative_volume *= wg.grid_x.dx() * wg.grid_p.dx();
  auto summary = base_summary(s, state);
  summary["wigner"] = {{"n_x", wg.grid_x.size()},
                       {"n_p", wg.grid_p.size()},
                       {"p_min", wg.grid_p.x_min()},
                       {"p_max", wg.grid_p.x_max()},
                       {"min", wg.min()},
                       {"negative_volume", negative_volume},
                       {"imag_residue", wg.imag_residue},
                       {"norm_x", numerics::integrate(wigner::marginal_x(wg))},
                       {"norm_p", numerics::integrate(wigner::marginal_p(wg))}};
  out.write_json("summary.json", summary);
  log << "wigner: min W " << fmt(wg.min()) << "\n";
  return kExitSuccess;
}

std::vector<double> default_probe_positions(const states::PolarFields& polar) {
  const auto& g = polar.grid();
  std::vector<double> cdf(g.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) cdf[j] = (acc += polar.density[j]);
  std::vector<double> xs;
  for (std::size_t i = 0; i < verify::kCumulantProbes; ++i) {
    const double target = (static_cast<double>(i) + 0.5) / static_cast<double>(verify::kCumulantProbes) * acc;
    const auto j = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
    xs.push_back(g.x(std::min(j, g.size() - 1)));
  }
  return xs;
}

int cmd_cumulants(const Settings& s, const Outputs& out, std::ostream& log) {
  const auto state = load_state(s);
  const auto polar = states::polar_decompose(state, s.options.eps_node);
  const auto derivs = states::log_derivatives(polar, s.options.method);
  const auto& cfg = object_at(s.doc, "cumulants");
  reject_unknown(cfg, {"x", "order", "method"}, "cumulants");
  const int order = static_cast<int>(count_or(cfg, "order", 4, "cumulants"));
  std::vector<wigner::CumulantMethod> methods{wigner::CumulantMethod::formula,
                                              wigner::CumulantMethod::characteristic_function};
  if (cfg.contains("method")) {
    const auto& m = cfg["method"];
    if (m == "formula")
      methods = {wigner::CumulantMethod::formula};
    else if (m == "characteristic_function")
      methods = {wigner::CumulantMethod::characteristic_function};
    else if (m != "both")
      throw ConfigurationError("cumulants.method must be 'formula', 'characteristic_function' or 'both'");
  }
  std::vector<double> xs;
  if (cfg.contains("x")) {
    const auto& v = cfg["x"];
    if (v.is_number()) {
      xs.push_back(v.get<double>());
    } else if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_number()) throw ConfigurationError("cumulants.x must hold numbers");
        xs.push_back(e.get<double>());
      }
    } else {
      throw ConfigurationError("cumulants.x must be a number or an array");
    }
  } else {
    xs = default_probe_positions(polar);
  }

  std::ostringstream csv;
  csv << "x,method,order,kappa,tau_max,condition_number,fit_degraded,status\n";
  json rows = json::array();
  std::size_t undefined = 0;
  for (double x : xs) {
    for (auto method : methods) {
      const char* name = method == wigner::CumulantMethod::formula ? "formula" : "characteristic_function";
      try {
        const auto t = wigner::conditional_cumulants(state, polar, derivs, x, order, method);
        for (std::size_t n = 0; n < t.kappa.size(); ++n)
          csv << fmt(t.x) << ',' << name << ',' << n + 1 << ',' << fmt(t.kappa[n]) << ',' << fmt(t.tau_max) << ','
              << fmt(t.condition_number) << ',' << (t.fit_degraded ? "true" : "false") << ",ok\n";
        rows.push_back({{"x", t.x},
                        {"method", name},
                        {"kappa", t.kappa},
                        {"condition_number", t.condition_number},
                        {"fit_degraded", t.fit_degraded}});
      } catch (const NodeUndefinedError&) {
        ++undefined;
        csv << fmt(x) << ',' << name << ",0,nan,nan,nan,false,node_undefined\n";
        rows.push_back({{"x", x}, {"method", name}, {"status", "node_undefined"}});
      }
    }
  }
  out.write("cumulants.csv", csv.str());
  auto summary = base_summary(s, state);
  summary["cumulants"] = rows;
  summary["node_undefined"] = undefined;
  out.write_json("summary.json", summary);
  log << "cumulants: " << xs.size() << " positions, " << undefined << " undefined\n";
  return kExitSuccess;
}

int cmd_budget(const Settings& s, const Outputs& out, std::ostream& log) {
  const auto state = load_state(s);
  const auto a = weakstats::analyze(state, options_for(s, false));
  auto summary = base_summary(s, state);
  summary["budget"] = budget_json(a.budget);
  summary["momentum_variance"] = a.momentum_variance;
  summary["tol_budget"] = s.tolerances.budget;
  summary["closed"] = std::abs(a.budget.residual) < s.tolerances.budget;
  out.write_json("summary.json", summary);
  log << "budget: total " << fmt(a.budget.total) << " = mean_weak " << fmt(a.budget.mean_weak)
      << " + var_of_weak_value " << fmt(a.budget.var_of_weak_value) << " (residual " << fmt(a.budget.residual) << ")\n";
  return kExitSuccess;
}

void print_report(const verify::VerifyReport& r, std::ostream& log) {
  for (const auto& c : r.checks)
    log << (c.skipped ? "[SKIP] " : (c.passed ? "[PASS] " : "[FAIL] ")) << c.name << " residual=" << fmt(c.residual)
        << " tol=" << fmt(c.tolerance) << "\n";
}

int cmd_verify(const Settings& s, const Outputs& out, std::ostream& log) {
  const auto state = load_state(s);
  const auto a = weakstats::analyze(state, options_for(s, true));
  const auto report = verify::verify_state(state, a, s.tolerances);
  auto summary = base_summary(s, state);
  summary["verify"] = verify_json(report);
  out.write_json("verify.json", summary);
  print_report(report, log);
  if (!report.passed()) throw VerificationFailed("verification failed");
  return kExitSuccess;
}

numerics::RealField potential_from(const json& p, const numerics::Grid& g, const Settings& s) {
  if (!p.is_object() || !p.contains("kind") || !p["kind"].is_string())
    throw ConfigurationError("evolve.potential.kind is required");
  const std::string kind = p["kind"];
  const std::string where = "evolve.potential";
  if (kind == "none") {
    reject_unknown(p, {"kind"}, where);
    return dynamics::zero_potential(g);
  }
  if (kind == "harmonic") {
    reject_unknown(p, {"kind", "omega", "x0"}, where);
    return dynamics::harmonic_potential(g, number_at(p, "omega", where), s.constants.mass, number_or(p, "x0", 0.0, where));
  }
  if (kind == "barrier") {
    reject_unknown(p, {"kind", "height", "width", "centre"}, where);
    return dynamics::barrier_potential(g, number_at(p, "height", where), number_at(p, "width", where),
                                       number_or(p, "centre", 0.0, where));
  }
  if (kind == "file") {
    reject_unknown(p, {"kind", "path"}, where);
    if (!p.contains("path") || !p["path"].is_string()) throw ConfigurationError("evolve.potential.path is required");
    fs::path path = p["path"].get<std::string>();
    if (path.is_relative()) path = s.base_dir / path;
    return dynamics::load_potential(path, g);
  }
  throw ConfigurationError("evolve.potential.kind must be none, harmonic, barrier or file");
}

int cmd_evolve(const Settings& s, const Outputs& out, std::ostream& log) {
  const auto state = load_state(s);
  const auto& e = object_at(s.doc, "evolve");
  reject_unknown(e, {"potential", "dt", "steps", "snapshot_every", "export_every", "seeds", "seed_count", "verify"},
                 "evolve");
  if (!e.contains("potential")) throw ConfigurationError("evolve.potential is required");
  dynamics::EvolutionConfig cfg{potential_from(e["potential"], state.grid(), s), number_at(e, "dt", "evolve"),
                                count_or(e, "steps", 0, "evolve"), count_or(e, "snapshot_every", 1, "evolve")};
  cfg.validate(state);

  std::vector<double> seeds;
  if (e.contains("seeds")) {
    if (!e["seeds"].is_array()) throw ConfigurationError("evolve.seeds must be an array");
    for (const auto& v : e["seeds"]) {
      if (!v.is_number()) throw ConfigurationError("evolve.seeds must hold numbers");
      seeds.push_back(v.get<double>());
    }
  } else {
    seeds = dynamics::quantile_seeds(state, count_or(e, "seed_count", 16, "evolve"));
  }
  bool run_verify = true;
  if (e.contains("verify")) {
    if (!e["verify"].is_boolean()) throw ConfigurationError("evolve.verify must be a boolean");
    run_verify = e["verify"].get<bool>();
  }

  const auto snaps = dynamics::evolve(state, cfg);
  const auto traj = dynamics::hydrodynamic_trajectories(snaps, seeds);

  std::size_t export_every = count_or(e, "export_every", 0, "evolve");
  if (export_every == 0) export_every = std::max<std::size_t>(1, (snaps.size() + 19) / 20);
  std::vector<std::size_t> exported;
  for (std::size_t i = 0; i < snaps.size(); i += export_every) exported.push_back(i);
  if (exported.back() != snaps.size() - 1) exported.push_back(snaps.size() - 1);

  std::vector<std::optional<weakstats::Analysis>> analyses(exported.size());
  std::vector<std::optional<verify::VerifyReport>> reports(exported.size());
  const auto opts = options_for(s, false);
  parallel_for(exported.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& snap = snaps[exported[i]];
      analyses[i] = weakstats::analyze(snap.state, opts);
      if (run_verify) reports[i] = verify::verify_state(snap.state, *analyses[i], s.tolerances);
    }
  });

  std::ostringstream snap_csv;
  snap_csv << field_header(true, s.eta.has_value());
  for (std::size_t i = 0; i < exported.size(); ++i)
    write_field_rows(snap_csv, *analyses[i], s.eta, snaps[exported[i]].t);
  out.write("snapshots.csv", snap_csv.str());

  std::ostringstream traj_csv;
  traj_csv << "seed_id,t,x,velocity\n";
  for (std::size_t k = 0; k < traj.paths.size(); ++k)
    for (const auto& smp : traj.paths[k].samples)
      traj_csv << k << ',' << fmt(smp.t) << ',' << fmt(smp.x) << ',' << fmt(smp.velocity) << '\n';
  out.write("trajectories.csv", traj_csv.str());

  bool all_pass = true;
  json per_snapshot = json::array();
  json snapshot_summary = json::array();
  for (std::size_t i = 0; i < exported.size(); ++i) {
    const auto& snap = snaps[exported[i]];
    const auto pm = dynamics::position_moments(snap.state);
    const auto& a = *analyses[i];
    json entry{{"t", snap.t},
               {"mean_x", pm.mean},
               {"var_x", pm.variance},
               {"energy", dynamics::energy(snap.state, cfg.potential)},
               {"budget", budget_json(a.budget)}};
    if (reports[i]) {
      entry["verify_overall"] = reports[i]->passed() ? "pass" : "fail";
      all_pass = all_pass && reports[i]->passed();
      per_snapshot.push_back({{"t", snap.t}, {"verify", verify_json(*reports[i])}});
    }
    snapshot_summary.push_back(entry);
  }
  if (run_verify) {
    auto vj = base_summary(s, state);
    vj["overall"] = all_pass ? "pass" : "fail";
    vj["snapshots"] = per_snapshot;
    out.write_json("verify.json", vj);
  }

  json paths = json::array();
  for (std::size_t k = 0; k < traj.paths.size(); ++k)
    paths.push_back({{"seed_id", k}, {"seed", traj.paths[k].seed}, {"truncated", traj.paths[k].truncated}});
  auto summary = base_summary(s, state);
  summary["evolve"] = {{"dt", cfg.dt},
                       {"steps", cfg.steps},
                       {"snapshot_every", cfg.snapshot_every},
                       {"export_every", export_every},
                       {"snapshots", snapshot_summary},
                       {"trajectories", paths},
                       {"crossed", traj.crossed},
                       {"max_mass_drift", traj.max_mass_drift}};
  out.write_json("summary.json", summary);
  log << "evolve: " << snaps.size() << " snapshots, " << exported.size() << " exported, " << traj.paths.size()
      << " trajectories\n";
  if (run_verify && !all_pass) throw VerificationFailed("snapshot verification failed");
  return kExitSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weak values and weak variances of momentum for 1-D quantum states", "weakvar"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string prefix;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"analyze", "weak-statistics fields and summary"},
      {"wigner", "Wigner quasidistribution export"},
      {"cumulants", "conditional cumulants by formula and characteristic function"},
      {"budget", "law of total variance decomposition"},
      {"verify", "invariant suite; exit 1 when any check fails"},
      {"evolve", "split-step propagation, snapshots and hydrodynamic trajectories"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--set", overrides, "override a config value, key=value with dotted keys")->take_all();
    sub->add_option("--out", prefix, "output path prefix")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    json doc = json::object();
    fs::path base_dir = fs::current_path();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigurationError("cannot open config file " + config_path);
      doc = json::parse(in);
      base_dir = fs::absolute(config_path).parent_path();
    }
    for (const auto& o : overrides) apply_override(doc, o);
    const Settings s = resolve(command, doc, base_dir);
    const Outputs outputs{prefix};
    const auto parent = outputs.path("config.json").parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    json archived = s.doc;
    archived["command"] = command;
    outputs.write_json("config.json", archived);

    if (command == "analyze") return cmd_analyze(s, outputs, out);
    if (command == "wigner") return cmd_wigner(s, outputs, out);
    if (command == "cumulants") return cmd_cumulants(s, outputs, out);
    if (command == "budget") return cmd_budget(s, outputs, out);
    if (command == "verify") return cmd_verify(s, outputs, out);
    return cmd_evolve(s, outputs, out);
  } catch (const VerificationFailed& e) {
    err << "weakvar " << command << ": " << e.what() << "\n";
    return kExitFailure;
  } catch (const ConfigurationError& e) {
    err << "configuration error: " << e.what() << "\n"
        << "usage: weakvar " << command << " --config <file> [--set key=value ...] --out <prefix>\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainTooSmallError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "config parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "weakvar " << command << ": " << e.what() << "\n";
    return kExitFailure;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace weakvar::cli
