#include "pmc/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

namespace pmc {

using nlohmann::json;

namespace {

void write_string(const std::string& s, std::string& out) {
  // nlohmann's dump handles escaping
  out += json(s).dump();
}

void write(const json& v, int depth, std::string& out) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close_pad(2 * depth, ' ');
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += pad;
        write_string(it.key(), out);
        out += ": ";
        write(it.value(), depth + 1, out);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ",\n";
        out += pad;
        write(v[k], depth + 1, out);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", d);
      out += buf;
      return;
    }
    default:
      out += v.dump();
  }
}

json doubles(const std::vector<double>& v) {
  json a = json::array();
  for (double d : v) a.push_back(d);
  return a;
}

}  // namespace

std::string canonical_json(const json& value) {
  std::string out;
  write(value, 0, out);
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[digest[k] >> 4];
    out += hex[digest[k] & 15];
  }
  return out;
}

void emit_report(const json& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError("cannot write report to '" + path + "'");
  out << canonical_json(report) << '\n';
  if (!out) throw ReportError("failed writing report to '" + path + "'");
}

json to_json(const PMCPoint& p) {
  json j;
  j["x"] = {p.x[0], p.x[1]};
  j["z"] = p.z;
  j["Y"] = {p.Y[0], p.Y[1]};
  j["t"] = p.t;
  return j;
}

json to_json(const SampleReport& r) {
  return {{"pass", r.pass},
          {"worst_point", to_json(r.worst_point)},
          {"worst_value", r.worst_value},
          {"samples_evaluated", r.samples_evaluated}};
}

json to_json(const BarrierReport& r) {
  return {{"pass", r.pass},
          {"worst_sub", r.worst_sub},
          {"worst_sub_node", r.worst_sub_node},
          {"worst_super", r.worst_super},
          {"worst_super_node", r.worst_super_node},
          {"tolerance", r.tolerance},
          {"allowance_constant", r.allowance_constant},
          {"spacing", r.spacing}};
}

json to_json(const GammaReport& r) {
  return {{"gamma", r.gamma},
          {"sup_derivative", r.sup_derivative},
          {"worst_point", to_json(r.worst_point)},
          {"samples_evaluated", r.samples_evaluated}};
}

json to_json(const SolveReport& r) {
  json j;
  j["converged"] = r.converged;
  if (!r.failure.empty()) j["failure"] = r.failure;
  j["outer_iterations"] = r.outer_iterations;
  j["inner_newton_counts"] = r.inner_newton_counts;
  j["inner_relaxation_counts"] = r.inner_relaxation_counts;
  j["residual_history"] = doubles(r.residual_history);
  j["increment_history"] = doubles(r.increment_history);
  j["min_increment_history"] = doubles(r.min_increment_history);
  j["monotonicity_violation"] = doubles(r.monotonicity_violation);
  j["confinement_violation"] = doubles(r.confinement_violation);
  j["final_residual"] = r.final_residual;
  j["residual_bound"] = r.residual_bound;
  j["residual_bound_holds"] = r.residual_bound_holds;
  j["gamma"] = r.gamma;
  j["gamma_sup_derivative"] = r.gamma_sup_derivative;
  j["gamma_certificate_min"] = r.gamma_certificate_min;
  j["cutoff"] = {{"c1", r.c1}, {"c2", r.c2}, {"a", r.a}, {"b", r.b}};
  j["contraction_rate"] = r.contraction_rate;
  j["min_theta"] = r.min_theta;
  j["max_gradient"] = r.max_gradient;
  j["sup_abs_u"] = r.sup_abs_u;
  j["sup_abs_mean_curvature"] = r.sup_abs_mean_curvature;
  if (r.quasi) {
    const QuasiCertificate& q = *r.quasi;
    j["graphical"] = q.graphical;
    j["quasi"] = {{"min_theta", q.min_theta},
                  {"graphical", q.graphical},
                  {"theta_threshold", q.theta_threshold},
                  {"refinement_checked", q.refinement_checked},
                  {"refined_min_theta", q.refined_min_theta},
                  {"relative_change", q.relative_change},
                  {"refinement_stable", q.refinement_stable},
                  {"jacobi_residual", q.jacobi_residual}};
  }
  return j;
}

json to_json(const RefinementReport& r) {
  json levels = json::array();
  for (const LevelMetrics& m : r.metrics) {
    json l{{"spacing", m.spacing},
           {"shape", m.shape},
           {"converged", m.converged},
           {"outer_iterations", m.outer_iterations},
           {"final_residual", m.final_residual},
           {"max_gradient", m.max_gradient},
           {"min_theta", m.min_theta},
           {"total_variation", m.total_variation},
           {"area", m.area}};
    if (!m.error.empty()) l["error"] = m.error;
    levels.push_back(std::move(l));
  }
  return {{"levels", doubles(r.levels)},
          {"per_level", std::move(levels)},
          {"area_orders", doubles(r.area_orders)},
          {"min_theta_orders", doubles(r.min_theta_orders)},
          {"total_variation_orders", doubles(r.total_variation_orders)},
          {"gradient_growth", doubles(r.gradient_growth)},
          {"suspected_non_graphical", r.suspected_non_graphical}};
}

}  // namespace pmc
