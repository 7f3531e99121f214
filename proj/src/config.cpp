#include "pmc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pmc {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void allow_keys(const json& obj, const std::string& where, std::set<std::string> keys) {
  if (!obj.is_object()) fail(where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (!keys.count(k)) fail("unknown key '" + k + "' in " + where);
}

double number(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) fail(where + "." + key + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(where + "." + key + " must be finite");
  return d;
}

int integer(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(where + "." + key + " must be an integer");
  return v.get<int>();
}

std::string text(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (v.is_number()) {
    std::ostringstream s;
    s.precision(17);
    s << v.get<double>();
    return s.str();
  }
  if (!v.is_string()) fail(where + "." + key + " must be a string expression");
  return v.get<std::string>();
}

template <class F>
void check_expression(const std::string& where, F&& parse) {
  try {
    parse();
  } catch (const ParseError& e) {
    fail(where + ": " + e.what());
  } catch (const GridError& e) {
    fail(where + ": " + e.what());
  }
}

GridSpec parse_grid(const json& g) {
  allow_keys(g, "grid", {"dimension", "shape", "lengths", "topology", "origin"});
  GridSpec s;
  if (!g.contains("dimension") || !g.contains("shape") || !g.contains("lengths") ||
      !g.contains("topology"))
    fail("grid needs dimension, shape, lengths and topology");
  s.dimension = integer(g, "dimension", "grid");
  try {
    s.shape = g.at("shape").get<std::vector<int>>();
    s.lengths = g.at("lengths").get<std::vector<double>>();
    if (g.contains("origin")) s.origin = g.at("origin").get<std::vector<double>>();
    for (const auto& t : g.at("topology").get<std::vector<std::string>>()) {
      if (t == "periodic")
        s.topology.push_back(Topology::periodic);
      else if (t == "dirichlet")
        s.topology.push_back(Topology::dirichlet);
      else
        fail("grid.topology entries must be \"periodic\" or \"dirichlet\", got \"" + t + "\"");
    }
  } catch (const json::exception& e) {
    fail(std::string("grid: ") + e.what());
  }
  try {
    BaseGrid check(s);
  } catch (const GridError& e) {
    fail(std::string("grid: ") + e.what());
  }
  return s;
}

void parse_solver(const json& s, SolveConfig& cfg) {
  allow_keys(s, "solver",
             {"tol_inner", "tol_outer", "max_newton", "max_outer", "max_relaxation", "armijo_c",
              "min_step", "gamma", "cutoff_margin", "samples", "theta_threshold",
              "barrier_allowance", "refinement_check"});
  if (s.contains("tol_inner")) cfg.tol_inner = number(s, "tol_inner", "solver");
  if (s.contains("tol_outer")) cfg.tol_outer = number(s, "tol_outer", "solver");
  if (s.contains("max_newton")) cfg.max_newton = integer(s, "max_newton", "solver");
  if (s.contains("max_outer")) cfg.max_outer = integer(s, "max_outer", "solver");
  if (s.contains("max_relaxation")) cfg.max_relaxation = integer(s, "max_relaxation", "solver");
  if (s.contains("armijo_c")) cfg.armijo_c = number(s, "armijo_c", "solver");
  if (s.contains("min_step")) cfg.min_step = number(s, "min_step", "solver");
  if (s.contains("gamma")) {
    const json& g = s.at("gamma");
    if (g.is_string() && g.get<std::string>() == "auto")
      cfg.gamma.reset();
    else
      cfg.gamma = number(s, "gamma", "solver");
  }
  if (s.contains("cutoff_margin")) cfg.cutoff_margin = number(s, "cutoff_margin", "solver");
  if (s.contains("samples")) cfg.samples = integer(s, "samples", "solver");
  if (s.contains("theta_threshold"))
    cfg.theta_threshold = number(s, "theta_threshold", "solver");
  if (s.contains("barrier_allowance"))
    cfg.barrier_allowance = number(s, "barrier_allowance", "solver");
  if (s.contains("refinement_check")) {
    if (!s.at("refinement_check").is_boolean()) fail("solver.refinement_check must be a boolean");
    cfg.refinement_check = s.at("refinement_check").get<bool>();
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("solver: ") + e.what());
  }
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    fail("override must look like key.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) fail("override path '" + path + "' has an empty component");
    if (!node->is_object()) {
      if (!node->is_null()) fail("override path '" + path + "' crosses a non-object value");
      *node = json::object();
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(parsed);
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  cfg.raw = doc;
  allow_keys(doc, "config",
             {"version", "name", "description", "grid", "pmc", "conformal", "barrier", "box",
              "solver", "transform", "reparam", "diagnose", "inputs", "outputs"});
  if (!doc.contains("version") || doc.at("version") != 1) fail("config.version must be 1");
  if (doc.contains("name")) cfg.name = text(doc, "name", "config");
  if (!doc.contains("grid")) fail("config needs a grid");
  cfg.grid = parse_grid(doc.at("grid"));

  // PMC function
  if (!doc.contains("pmc")) fail("config needs a pmc section");
  const json& p = doc.at("pmc");
  allow_keys(p, "pmc", {"expr", "h1", "h2"});
  const bool has_expr = p.contains("expr");
  const bool has_h1 = p.contains("h1"), has_h2 = p.contains("h2");
  if (has_expr == (has_h1 || has_h2))
    fail("pmc needs exactly one of expr or the pair h1/h2");
  if (has_h1 != has_h2) fail("pmc.h1 and pmc.h2 must be given together");
  if (has_expr) {
    cfg.pmc.expr = text(p, "expr", "pmc");
    check_expression("pmc.expr", [&] { parse_pmc(*cfg.pmc.expr); });
  } else {
    cfg.pmc.h1 = text(p, "h1", "pmc");
    cfg.pmc.h2 = text(p, "h2", "pmc");
    check_expression("pmc.h1", [&] { parse_pmc(*cfg.pmc.h1); });
    check_expression("pmc.h2", [&] { parse_pmc(*cfg.pmc.h2); });
  }

  // conformal structure
  if (doc.contains("conformal")) {
    const json& c = doc.at("conformal");
    if (c.is_string()) {
      if (c.get<std::string>() != "product")
        fail("conformal must be \"product\" or an object with f or warped");
    } else {
      allow_keys(c, "conformal", {"f", "warped", "n", "derivatives"});
      if (c.contains("f") == c.contains("warped"))
        fail("conformal needs exactly one of f or warped");
      if (c.contains("f")) {
        cfg.conformal.kind = ConformalSpec::Kind::factor;
        cfg.conformal.f = text(c, "f", "conformal");
        check_expression("conformal.f",
                         [&] { ConformalFactor::from_expression(cfg.conformal.f); });
      } else {
        const json& w = c.at("warped");
        allow_keys(w, "conformal.warped", {"h", "interval"});
        if (!w.contains("h") || !w.contains("interval"))
          fail("conformal.warped needs h and interval");
        cfg.conformal.kind = ConformalSpec::Kind::warped;
        cfg.conformal.warped_h = text(w, "h", "conformal.warped");
        check_expression("conformal.warped.h",
                         [&] { WarpedProfile::from_expression(cfg.conformal.warped_h); });
        const json& iv = w.at("interval");
        if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number())
          fail("conformal.warped.interval must be [r_lo, r_hi]");
        cfg.conformal.r_lo = iv[0].get<double>();
        cfg.conformal.r_hi = iv[1].get<double>();
        if (!(cfg.conformal.r_lo < cfg.conformal.r_hi))
          fail("conformal.warped.interval needs r_lo < r_hi");
      }
      if (c.contains("n")) {
        cfg.conformal.n = integer(c, "n", "conformal");
        if (cfg.conformal.n < 1) fail("conformal.n must be positive");
      }
      if (c.contains("derivatives")) {
        const std::string m = text(c, "derivatives", "conformal");
        if (m == "analytic")
          cfg.conformal.mode = DerivativeMode::analytic;
        else if (m == "finite_difference")
          cfg.conformal.mode = DerivativeMode::finite_difference;
        else
          fail("conformal.derivatives must be \"analytic\" or \"finite_difference\"");
      }
    }
  }

  // barriers
  if (doc.contains("barrier")) {
    const json& b = doc.at("barrier");
    BarrierSpec spec;
    if (b.contains("from_phi")) {
      allow_keys(b, "barrier", {"from_phi"});
      const json& f = b.at("from_phi");
      allow_keys(f, "barrier.from_phi", {"base", "phi", "psi"});
      if (!f.contains("base") || !f.contains("phi") || !f.contains("psi"))
        fail("barrier.from_phi needs base, phi and psi");
      spec.kind = BarrierSpec::Kind::from_phi;
      spec.base = text(f, "base", "barrier.from_phi");
      spec.phi = text(f, "phi", "barrier.from_phi");
      spec.psi = text(f, "psi", "barrier.from_phi");
      check_expression("barrier.from_phi.base", [&] {
        static const std::vector<std::string> vars{"x1", "x2", "z", "y1", "y2", "t"};
        if (Expression::parse(spec.base, vars).depends_on(2))
          fail("barrier.from_phi.base must not depend on z");
      });
      check_expression("barrier.from_phi.phi", [&] { parse_pmc(spec.phi); });
      if (std::find(cfg.grid.topology.begin(), cfg.grid.topology.end(), Topology::dirichlet) ==
          cfg.grid.topology.end())
        fail("barrier.from_phi needs a grid with a dirichlet axis");
    } else {
      allow_keys(b, "barrier", {"u1", "u0", "psi"});
      if (!b.contains("u1") || !b.contains("u0")) fail("barrier needs u1 and u0");
      spec.u1 = text(b, "u1", "barrier");
      spec.u0 = text(b, "u0", "barrier");
      if (b.contains("psi")) spec.psi = text(b, "psi", "barrier");
    }
    const GridPtr g = build_grid(cfg.grid);
    for (const std::string* e : {&spec.u1, &spec.u0})
      if (!e->empty()) check_expression("barrier", [&] { field_from_expr(g, *e); });
    if (spec.psi) check_expression("barrier.psi", [&] { field_from_expr(g, *spec.psi); });
    cfg.barrier = spec;
  }

  if (doc.contains("box")) {
    const json& b = doc.at("box");
    allow_keys(b, "box", {"z_lo", "z_hi"});
    if (!b.contains("z_lo") || !b.contains("z_hi")) fail("box needs z_lo and z_hi");
    cfg.z_lo = number(b, "z_lo", "box");
    cfg.z_hi = number(b, "z_hi", "box");
    if (!(*cfg.z_lo < *cfg.z_hi)) fail("box needs z_lo < z_hi");
  }

  if (doc.contains("solver")) parse_solver(doc.at("solver"), cfg.solver);

  auto positive_count = [&](const char* section, const char* key, int& out, int min) {
    if (!doc.contains(section)) return;
    const json& s = doc.at(section);
    allow_keys(s, section, {key});
    if (s.contains(key)) out = integer(s, key, section);
    if (out < min) fail(std::string(section) + "." + key + " must be at least " +
                        std::to_string(min));
  };
  positive_count("transform", "samples", cfg.transform_samples, 2);
  positive_count("reparam", "samples", cfg.reparam_samples, 2);
  positive_count("diagnose", "levels", cfg.diagnose_levels, 2);

  if (doc.contains("inputs")) {
    const json& in = doc.at("inputs");
    allow_keys(in, "inputs", {"field"});
    if (in.contains("field")) cfg.input_field = text(in, "field", "inputs");
  }
  if (doc.contains("outputs")) {
    const json& out = doc.at("outputs");
    allow_keys(out, "outputs", {"report", "field"});
    if (out.contains("report")) cfg.output_report = text(out, "report", "outputs");
    if (out.contains("field")) cfg.output_field = text(out, "field", "outputs");
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) fail("config file '" + path + "' is not valid JSON");
  for (const std::string& o : overrides) apply_override(doc, o);
  return parse_config(doc);
}

PMCFunction build_pmc(const RunConfig& cfg) {
  if (cfg.pmc.quasi()) return build_quasi(cfg).composite();
  return parse_pmc(*cfg.pmc.expr);
}

QuasiDecomposition build_quasi(const RunConfig& cfg) {
  if (!cfg.pmc.quasi()) fail("pmc has no h1/h2 decomposition");
  return QuasiDecomposition{parse_pmc(*cfg.pmc.h1), parse_pmc(*cfg.pmc.h2)};
}

ConformalReparametrization build_reparametrization(const RunConfig& cfg) {
  if (cfg.conformal.kind != ConformalSpec::Kind::warped)
    fail("conformal.warped is required here");
  try {
    return warped_to_conformal(WarpedProfile::from_expression(cfg.conformal.warped_h),
                               cfg.conformal.r_lo, cfg.conformal.r_hi);
  } catch (const std::domain_error& e) {
    fail(std::string("conformal.warped: ") + e.what());
  }
}

ConformalFactor build_factor(const RunConfig& cfg) {
  ConformalFactor f;
  switch (cfg.conformal.kind) {
    case ConformalSpec::Kind::product: return ConformalFactor::zero();
    case ConformalSpec::Kind::factor:
      f = ConformalFactor::from_expression(cfg.conformal.f);
      break;
    case ConformalSpec::Kind::warped:
      f = build_reparametrization(cfg).factor;
      break;
  }
  if (cfg.conformal.mode == DerivativeMode::finite_difference)
    f.set_mode(DerivativeMode::finite_difference);
  return f;
}

int ambient_dimension(const RunConfig& cfg) {
  return cfg.conformal.n > 0 ? cfg.conformal.n : cfg.grid.dimension;
}

BarrierPair build_barriers(const RunConfig& cfg, const GridPtr& grid) {
  if (!cfg.barrier) fail("config needs a barrier section");
  const BarrierSpec& b = *cfg.barrier;
  if (b.kind == BarrierSpec::Kind::from_phi) {
    const ScalarField psi = field_from_expr(grid, *b.psi);
    const PMCFunction parsed = parse_pmc(b.base);
    const PMCFunction fbase(
        b.base, [parsed](const PMCPoint& q) { return parsed(q); },
        [parsed](const PMCPoint& q) { return parsed.partials(q); }, false);
    const PMCFunction phi = parse_pmc(b.phi);
    const WorkingBox box = build_box(cfg, *grid);
    return barriers_from_phi(fbase, phi, psi, box, cfg.solver);
  }
  ScalarField u1 = field_from_expr(grid, b.u1);
  ScalarField u0 = field_from_expr(grid, b.u0);
  if (b.psi) {
    const ScalarField psi = field_from_expr(grid, *b.psi);
    for (std::size_t p : grid->boundary_nodes()) u1[p] = u0[p] = psi[p];
  }
  return BarrierPair::make(std::move(u1), std::move(u0));
}

WorkingBox build_box(const RunConfig& cfg, const BaseGrid& grid) {
  if (cfg.z_lo && cfg.z_hi) return WorkingBox::over(grid, *cfg.z_lo, *cfg.z_hi);
  if (!cfg.barrier || cfg.barrier->kind != BarrierSpec::Kind::fields)
    fail("config needs a box section when barriers are not given as fields");
  const GridPtr g = build_grid(grid.spec());
  const double lo = field_from_expr(g, cfg.barrier->u1).min();
  const double hi = field_from_expr(g, cfg.barrier->u0).max();
  const double pad = std::max(hi - lo, 1.0);
  return WorkingBox::over(grid, lo - pad, hi + pad);
}

}  // namespace pmc
