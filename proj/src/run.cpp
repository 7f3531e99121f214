#include "pmc/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "pmc/analysis.hpp"
#include "pmc/calculus.hpp"
#include "pmc/config.hpp"
#include "pmc/geometry.hpp"
#include "pmc/report.hpp"
#include "pmc/residual.hpp"
#include "pmc/solver.hpp"

namespace pmc {

using nlohmann::json;

namespace {

/// Output failures are reported as invalid configuration (exit 2).
void write_field(const ScalarField& f, const std::string& path) {
  try {
    write_field_csv(f, path);
  } catch (const std::runtime_error& e) {
    throw ReportError(e.what());
  }
}

std::string number_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class TableWriter {
 public:
  TableWriter(const std::string& path, const std::string& header) : out_(path, std::ios::binary) {
    if (!out_) throw ReportError("cannot open '" + path + "' for writing");
    out_ << header << '\n';
  }
  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      if (!first) out_ << ',';
      first = false;
      out_ << number_text(v);
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

struct Context {
  const RunOptions& opt;
  std::ostream& log;
  RunConfig cfg;
  json report;
  std::optional<std::string> report_path;
  std::optional<std::string> field_path;
};

bool is_product(const RunConfig& cfg) {
  return cfg.conformal.kind == ConformalSpec::Kind::product;
}

json functionals(const ScalarField& v) {
  json j{{"area", area_functional(v)},
         {"total_variation", total_variation(v)},
         {"volume", v.grid().volume()},
         {"perimeter_gap", perimeter_gap(v)}};
  j["perimeter_bound_holds"] = perimeter_gap(v) >= -1e-12;
  return j;
}

/// sup of f over the grid nodes and `samples` heights in [lo, hi].
double sup_factor(const ConformalFactor& f, const BaseGrid& g, double lo, double hi) {
  double s = -std::numeric_limits<double>::infinity();
  const int samples = 33;
  for (std::size_t p = 0; p < g.size(); ++p)
    for (int k = 0; k < samples; ++k)
      s = std::max(s, f.value(g.position(p), lo + (hi - lo) * k / (samples - 1)));
  return s;
}

int cmd_solve(Context& c) {
  const RunConfig& cfg = c.cfg;
  const GridPtr grid = build_grid(cfg.grid);
  const PMCFunction h = build_pmc(cfg);
  const bool product = is_product(cfg);
  if (cfg.pmc.quasi() && !product)
    throw ConfigError("pmc.h1/h2 solves need the product metric");
  const ConformalFactor factor = build_factor(cfg);
  const int n = ambient_dimension(cfg);
  const WorkingBox box = build_box(cfg, *grid);
  const BarrierPair b = build_barriers(cfg, grid);

  const BarrierReport br =
      check_barrier(b, h, product ? nullptr : &factor, n, &box, cfg.solver);
  c.report["barrier_check"] = to_json(br);
  if (!br.pass) {
    c.report["failure"] = "barrier pair does not satisfy the sub/supersolution inequalities";
    return kExitSolverFailure;
  }

  ScalarField v;
  SolveReport rep;
  if (cfg.pmc.quasi()) {
    const BarrierBuilder refine = [&cfg](const GridPtr& g) { return build_barriers(cfg, g); };
    std::tie(v, rep) = solve_quasi(build_quasi(cfg), b, box, cfg.solver, &refine);
    c.report["min_theta"] = rep.quasi->min_theta;
    c.report["graphical"] = rep.quasi->graphical;
  } else {
    const PMCFunction hp = product ? h : conformal_transform_pmc(h, factor, n);
    std::tie(v, rep) = outer_iterate(hp, b, box, cfg.solver);
  }
  c.report["solve"] = to_json(rep);
  c.report["converged"] = rep.converged;
  c.report["final_residual"] = rep.final_residual;
  c.report["residual_history"] = rep.residual_history;
  c.report["functionals"] = functionals(v);
  if (!product) {
    const double res = interior_sup_norm(pmc_residual(v, h, &factor, n));
    const double sup_f = sup_factor(factor, *grid, b.u1.min(), b.u0.max());
    const double bound = std::exp(sup_f) * (cfg.solver.tol_inner + rep.gamma * cfg.solver.tol_outer);
    c.report["conformal"] = {{"residual", res},
                             {"sup_f", sup_f},
                             {"bound", bound},
                             {"bound_holds", res <= bound}};
  }
  if (c.field_path) write_field(v, *c.field_path);
  return kExitOk;
}

int cmd_check_barrier(Context& c) {
  const RunConfig& cfg = c.cfg;
  const GridPtr grid = build_grid(cfg.grid);
  const PMCFunction h = build_pmc(cfg);
  const ConformalFactor factor = build_factor(cfg);
  const bool product = is_product(cfg);
  const WorkingBox box = build_box(cfg, *grid);
  try {
    const BarrierPair b = build_barriers(cfg, grid);
    const BarrierReport r = check_barrier(b, h, product ? nullptr : &factor,
                                          ambient_dimension(cfg), &box, cfg.solver);
    c.report["barrier_check"] = to_json(r);
    c.report["pass"] = r.pass;
    return r.pass ? kExitOk : kExitCheckFailed;
  } catch (const OrderingError& e) {
    const Point x = grid->position(e.node);
    c.report["pass"] = false;
    c.report["failure"] = e.what();
    c.report["violating_node"] = {{"index", e.node}, {"x", {x[0], x[1]}}};
    return kExitCheckFailed;
  }
}

int cmd_check_monotone(Context& c) {
  const RunConfig& cfg = c.cfg;
  const GridPtr grid = build_grid(cfg.grid);
  const WorkingBox box = build_box(cfg, *grid);
  SampleReport r;
  if (cfg.pmc.quasi()) {
    r = check_quasi_decreasing(build_quasi(cfg), box, cfg.solver.samples);
    c.report["condition"] = "quasi_decreasing";
  } else {
    r = check_monotone(build_pmc(cfg), box, cfg.solver.samples);
    c.report["condition"] = "monotone";
  }
  c.report["check"] = to_json(r);
  c.report["pass"] = r.pass;
  return r.pass ? kExitOk : kExitCheckFailed;
}

int cmd_transform(Context& c) {
  const RunConfig& cfg = c.cfg;
  if (is_product(cfg)) throw ConfigError("transform needs a conformal section with f or warped");
  const GridPtr grid = build_grid(cfg.grid);
  const WorkingBox box = build_box(cfg, *grid);
  const PMCFunction h = build_pmc(cfg);
  const ConformalFactor factor = build_factor(cfg);
  const int n = ambient_dimension(cfg);
  const PMCFunction hp = conformal_transform_pmc(h, factor, n);
  const PMCFunction back = conformal_inverse_transform_pmc(hp, factor, n);

  std::optional<TableWriter> table;
  if (c.field_path) table.emplace(*c.field_path, "x1,x2,z,y1,y2,t,H,H_product");
  double worst = 0.0;
  std::size_t count = 0;
  for_each_lattice_point(box, cfg.transform_samples, [&](const PMCPoint& p) {
    const double hv = h(p), hpv = hp(p);
    worst = std::max(worst, std::abs(back(p) - hv));
    ++count;
    if (table) table->row({p.x[0], p.x[1], p.z, p.Y[0], p.Y[1], p.t, hv, hpv});
  });
  c.report["points"] = count;
  c.report["round_trip_error"] = worst;
  return kExitOk;
}

int cmd_reparam(Context& c) {
  const RunConfig& cfg = c.cfg;
  const WarpedProfile profile = WarpedProfile::from_expression(cfg.conformal.warped_h);
  const ConformalReparametrization rp = build_reparametrization(cfg);
  const int N = cfg.reparam_samples;

  std::optional<TableWriter> table;
  if (c.field_path) table.emplace(*c.field_path, "s,r,f,f_s,f_ss");
  for (int k = 0; k < N; ++k) {
    const double s = rp.s_max * k / (N - 1);
    const double r = rp.r_of_s(s);
    const ConformalFactor::Derivatives d = rp.factor.derivatives({0.0, 0.0}, s);
    if (table) table->row({s, r, d.f, d.fr, d.frr});
  }
  double worst = 0.0, prev = -std::numeric_limits<double>::infinity();
  bool increasing = true;
  for (int k = 0; k < N; ++k) {
    const double r = cfg.conformal.r_lo + (cfg.conformal.r_hi - cfg.conformal.r_lo) * k / (N - 1);
    const double s = rp.s_of_r(r);
    increasing = increasing && s > prev;
    prev = s;
    worst = std::max(worst, std::abs(rp.factor.value({0.0, 0.0}, s) - std::log(profile(r))));
  }
  c.report["s_max"] = rp.s_max;
  c.report["samples"] = N;
  c.report["max_round_trip_error"] = worst;
  c.report["s_strictly_increasing"] = increasing;
  return kExitOk;
}

int cmd_diagnose(Context& c) {
  const RunConfig& cfg = c.cfg;
  if (cfg.pmc.quasi() && !is_product(cfg))
    throw ConfigError("pmc.h1/h2 solves need the product metric");
  const GridPtr grid = build_grid(cfg.grid);
  const WorkingBox box = build_box(cfg, *grid);
  const PMCFunction h = build_pmc(cfg);
  RefinementProblem problem;
  problem.grid = cfg.grid;
  problem.h = is_product(cfg) ? h
                              : conformal_transform_pmc(h, build_factor(cfg), ambient_dimension(cfg));
  problem.barriers = [cfg](const GridPtr& g) { return build_barriers(cfg, g); };
  problem.z_lo = box.z_lo;
  problem.z_hi = box.z_hi;
  problem.solver = cfg.solver;
  const int levels = c.opt.levels.value_or(cfg.diagnose_levels);
  if (levels < 2) throw ConfigError("--levels must be at least 2");
  c.report["diagnostics"] = to_json(blowup_diagnostics(problem, levels));
  return kExitOk;
}

int cmd_eval_residual(Context& c) {
  const RunConfig& cfg = c.cfg;
  if (!cfg.input_field) throw ConfigError("eval-residual needs inputs.field");
  ScalarField u;
  try {
    u = read_field_csv(*cfg.input_field);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("inputs.field: ") + e.what());
  }
  const PMCFunction h = build_pmc(cfg);
  const ConformalFactor factor = build_factor(cfg);
  const ScalarField r =
      pmc_residual(u, h, is_product(cfg) ? nullptr : &factor, ambient_dimension(cfg));
  c.report["sup_residual"] = interior_sup_norm(r);
  c.report["functionals"] = functionals(u);
  if (c.field_path) write_field(r, *c.field_path);
  return kExitOk;
}

std::string best_iterate_path(const Context& c) {
  if (c.field_path) return *c.field_path + ".best_iterate.csv";
  if (c.report_path) return *c.report_path + ".best_iterate.csv";
  return {};
}

int dispatch(Context& c) {
  const std::string& s = c.opt.subcommand;
  if (s == "solve") return cmd_solve(c);
  if (s == "check-barrier") return cmd_check_barrier(c);
  if (s == "check-monotone") return cmd_check_monotone(c);
  if (s == "transform") return cmd_transform(c);
  if (s == "reparam") return cmd_reparam(c);
  if (s == "diagnose") return cmd_diagnose(c);
  if (s == "eval-residual") return cmd_eval_residual(c);
  throw ConfigError("unknown subcommand '" + s + "'");
}

}  // namespace

int run(const RunOptions& opt, std::ostream& log) {
  Context c{opt, log, {}, json::object(), opt.out_report, opt.out_field};
  c.report["artifact_version"] = kArtifactVersion;
  c.report["subcommand"] = opt.subcommand;
  if (opt.seed) c.report["seed"] = *opt.seed;

  int code = kExitOk;
  try {
    c.cfg = load_config(opt.config_path, opt.overrides);
    if (!c.report_path) c.report_path = c.cfg.output_report;
    if (!c.field_path) c.field_path = c.cfg.output_field;
    c.report["config_hash"] = sha256_hex(canonical_json(c.cfg.raw));
    c.report["config_name"] = c.cfg.name;
    code = dispatch(c);
  } catch (const ConfigError& e) {
    c.report["failure"] = e.what();
    code = kExitConfigInvalid;
  } catch (const ParseError& e) {
    c.report["failure"] = e.what();
    code = kExitConfigInvalid;
  } catch (const ReportError& e) {
    c.report["failure"] = e.what();
    code = kExitConfigInvalid;
  } catch (const SolverError& e) {
    c.report["failure"] = e.what();
    c.report["converged"] = false;
    c.report["residual_history"] = e.residual_history;
    if (e.partial) c.report["solve"] = to_json(*e.partial);
    const std::string path = best_iterate_path(c);
    if (e.best_iterate && !path.empty()) {
      try {
        write_field(*e.best_iterate, path);
        c.report["best_iterate_path"] = path;
      } catch (const ReportError&) {
        c.report["best_iterate_path"] = nullptr;
      }
    } else {
      c.report["best_iterate_path"] = nullptr;
    }
    code = kExitSolverFailure;
  } catch (const OrderingError& e) {
    c.report["failure"] = e.what();
    c.report["violating_node"] = e.node;
    code = kExitCheckFailed;
  } catch (const std::exception& e) {
    // precondition, box and evaluation failures of the numerical pipeline
    c.report["failure"] = e.what();
    code = kExitSolverFailure;
  }
  c.report["exit_code"] = code;
  if (c.report.contains("failure"))
    log << "pmcgraph " << opt.subcommand << ": " << c.report["failure"].get<std::string>()
        << '\n';

  if (c.report_path) {
    try {
      emit_report(c.report, *c.report_path);
    } catch (const ReportError& e) {
      log << "pmcgraph: " << e.what() << '\n';
      return kExitConfigInvalid;
    }
  } else {
    std::cout << canonical_json(c.report) << '\n';
  }
  return code;
}

}  // namespace pmc
