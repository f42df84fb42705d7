#pragma once

// JSON and CSV artifacts for scans and evolutions. Needs nlohmann/json on the
// include path; the numerical headers do not.

#include <fstream>
#include <string>
#include <vector>

#include "iprep/adiabatic.hpp"
#include "iprep/csv.hpp"
#include "iprep/models.hpp"
#include "iprep/rg_solver.hpp"
#include "json.hpp"

namespace iprep {

using json = nlohmann::ordered_json;

inline json to_json(const RGModelSpec& spec) {
  return {{"kind", to_string(spec.kind())},
          {"n_sites", spec.size()},
          {"epsilons", std::vector<double>(spec.epsilons().begin(), spec.epsilons().end())},
          {"omegas", std::vector<double>(spec.omegas().begin(), spec.omegas().end())}};
}

inline json to_json(const ContinuationPolicy& p) {
  json j = {{"initial_dg", p.initial_dg},       {"adaption", p.adaption},
            {"residual_tol", p.residual_tol},   {"taylor_order", p.taylor_order},
            {"collision_tol", p.collision_tol}, {"min_dg", p.min_dg},
            {"max_lm_iterations", p.max_lm_iterations}};
  j["max_dg"] = p.max_dg ? json(*p.max_dg) : json(nullptr);
  return j;
}

/// Overrides fields present in j; unknown keys are an error.
inline ContinuationPolicy apply_overrides(ContinuationPolicy p, const json& j) {
  for (const auto& [key, v] : j.items()) {
    if (key == "initial_dg") p.initial_dg = v.get<double>();
    else if (key == "adaption") p.adaption = v.get<double>();
    else if (key == "residual_tol") p.residual_tol = v.get<double>();
    else if (key == "taylor_order") p.taylor_order = v.get<int>();
    else if (key == "collision_tol") p.collision_tol = v.get<double>();
    else if (key == "min_dg") p.min_dg = v.get<double>();
    else if (key == "max_lm_iterations") p.max_lm_iterations = v.get<int>();
    else if (key == "max_dg") p.max_dg = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    else throw std::invalid_argument("unknown policy field '" + key + "'");
  }
  p.validate();
  return p;
}

inline CsvTable gap_scan_csv(const GapScan& scan) {
  CsvTable t({"g", "min_gap", "argmin_seed_a", "argmin_seed_b", "delta_g_used"});
  for (const auto& r : scan.rows)
    t.row(r.g, r.min_gap, static_cast<unsigned long long>(r.seed_a), static_cast<unsigned long long>(r.seed_b),
          r.dg_used);
  return t;
}

inline json gap_scan_sidecar(const GapScan& scan, const RGModelSpec& spec, const ContinuationPolicy& policy) {
  json states = json::array();
  for (const auto& s : scan.final_states)
    states.push_back({{"seed", s.seed},
                      {"M", s.M},
                      {"residual_sq", s.residual_sq},
                      {"q", std::vector<double>(s.q.data(), s.q.data() + s.q.size())}});
  return {{"spec", to_json(spec)},
          {"policy", to_json(policy)},
          {"g_target", scan.g_target},
          {"path_min", {{"g", scan.path_min.g},
                        {"min_gap", scan.path_min.min_gap},
                        {"seed_a", scan.path_min.seed_a},
                        {"seed_b", scan.path_min.seed_b}}},
          {"accepted_steps", scan.accepted_steps},
          {"rejected_steps", scan.rejected_steps},
          {"magnetization_violations", scan.magnetization_violations},
          {"final_states", std::move(states)}};
}

inline json checkpoints_json(const EvolutionReport& r, const Schedule& s) {
  json cps = json::array();
  for (const auto& c : r.checkpoints)
    cps.push_back({{"t", c.t}, {"g", c.g}, {"fidelity", c.fidelity}, {"norm", c.norm}});
  return {{"schedule", {{"g_start", s.g_start}, {"g_end", s.g_end}, {"T", s.T}, {"interpolation", "linear"}}},
          {"steps", r.steps},
          {"dt", r.dt},
          {"final_fidelity", r.final_fidelity},
          {"max_norm_drift", r.max_norm_drift},
          {"checkpoints", std::move(cps)}};
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump(2) << '\n';
}

}  // namespace iprep
