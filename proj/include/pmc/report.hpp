#pragma once

// Deterministic JSON reports: sorted keys, 17 significant digits, no
// timestamps.

#include <stdexcept>
#include <string>

#include "json.hpp"

#include "pmc/analysis.hpp"
#include "pmc/pmc_function.hpp"
#include "pmc/solver.hpp"

namespace pmc {

inline constexpr const char* kArtifactVersion = "1.0.0";

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Key-sorted JSON with two-space indentation; doubles printed with %.17g,
/// non-finite doubles as null.
std::string canonical_json(const nlohmann::json& value);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(const std::string& bytes);

/// Writes canonical_json(report) plus a trailing newline; ReportError if the
/// path cannot be written.
void emit_report(const nlohmann::json& report, const std::string& path);

nlohmann::json to_json(const PMCPoint& p);
nlohmann::json to_json(const SampleReport& r);
nlohmann::json to_json(const BarrierReport& r);
nlohmann::json to_json(const GammaReport& r);
nlohmann::json to_json(const SolveReport& r);
nlohmann::json to_json(const RefinementReport& r);

}  // namespace pmc
