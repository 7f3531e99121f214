#pragma once

// JSON run configuration for the command-line front end. The schema is
// documented in configs/README.md.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "pmc/geometry.hpp"
#include "pmc/grid.hpp"
#include "pmc/pmc_function.hpp"
#include "pmc/solver.hpp"

namespace pmc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PmcSpec {
  std::optional<std::string> expr;
  std::optional<std::string> h1;
  std::optional<std::string> h2;

  bool quasi() const { return h1.has_value(); }
};

struct ConformalSpec {
  enum class Kind { product, factor, warped };
  Kind kind = Kind::product;
  std::string f;         // factor: expression over x1, x2, r
  std::string warped_h;  // warped: expression over r
  double r_lo = 0.0;
  double r_hi = 0.0;
  int n = 0;  // 0 means the grid dimension
  DerivativeMode mode = DerivativeMode::analytic;
};

struct BarrierSpec {
  enum class Kind { fields, from_phi };
  Kind kind = Kind::fields;
  std::string u1, u0;             // fields: expressions over x1, x2
  std::optional<std::string> psi; // boundary trace, overrides barrier boundary values
  std::string base, phi;          // from_phi: PMC expressions
};

struct RunConfig {
  nlohmann::json raw;  // after overrides; hashed into reports
  std::string name;
  GridSpec grid;
  PmcSpec pmc;
  ConformalSpec conformal;
  std::optional<BarrierSpec> barrier;
  std::optional<double> z_lo, z_hi;
  SolveConfig solver;
  int transform_samples = 5;
  int reparam_samples = 1000;
  int diagnose_levels = 3;
  std::optional<std::string> input_field;
  std::optional<std::string> output_report;
  std::optional<std::string> output_field;
};

/// Applies `key.path=value` to the JSON document. The value is parsed as JSON
/// when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Parses and validates; throws ConfigError with the first failure.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Builders from a validated configuration.

PMCFunction build_pmc(const RunConfig& cfg);
QuasiDecomposition build_quasi(const RunConfig& cfg);
/// Zero factor for the product metric.
ConformalFactor build_factor(const RunConfig& cfg);
/// Warped-product reparametrisation; throws ConfigError unless kind is warped.
ConformalReparametrization build_reparametrization(const RunConfig& cfg);
int ambient_dimension(const RunConfig& cfg);
/// Barrier pair on an arbitrary grid (used for refinement).
BarrierPair build_barriers(const RunConfig& cfg, const GridPtr& grid);
/// Working box from the config, or the barrier range padded by its width.
WorkingBox build_box(const RunConfig& cfg, const BaseGrid& grid);

}  // namespace pmc
