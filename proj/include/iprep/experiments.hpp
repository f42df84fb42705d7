#pragma once

// Named experiments driven by a JSON config. Each writes CSV/JSON artifacts
// into its output directory and evaluates a few built-in assertions.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "iprep/adiabatic.hpp"
#include "iprep/csv.hpp"
#include "iprep/exact_diag.hpp"
#include "iprep/io.hpp"
#include "iprep/models.hpp"
#include "iprep/rg_solver.hpp"
#include "iprep/xxz_tba.hpp"
#include "iprep/xy_analytics.hpp"

namespace iprep {

/// Schema violation in a config; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FieldSpec {
  std::string name;
  std::string type;  // "string", "int", "number", "int[]", "number[]", "object"
  bool required = false;
  std::string help;
};

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::vector<FieldSpec> params;
  bool randomized = false;  // seed mandatory
};

struct ExperimentConfig {
  std::string experiment;
  json params = json::object();
  json policy = json::object();
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";
  json raw;
};

struct AssertionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunReport {
  json config;
  std::string input_hash;
  std::vector<std::string> manifest;
  double wall_seconds = 0.0;
  std::vector<AssertionResult> assertions;
  json summary = json::object();

  bool passed() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.passed; });
  }

  json to_json() const {
    json a = json::array();
    for (const auto& x : assertions) a.push_back({{"name", x.name}, {"passed", x.passed}, {"detail", x.detail}});
    return {{"config", config},          {"input_hash", input_hash}, {"manifest", manifest},
            {"wall_seconds", wall_seconds}, {"assertions", a},       {"summary", summary},
            {"passed", passed()}};
  }
};

inline const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> cat = {
      {"rg_gap_scaling",
       "full-spectrum gap scans over N, min-over-path gap and log-log slope",
       {{"model", "string", true, "central_spin | constant_spacing | random_uniform"},
        {"sizes", "int[]", true, "site counts, each in [3, 14]"},
        {"g_target_factor", "number", false, "path end in units of max spacing / N (default 5)"},
        {"slope_range", "number[]", false, "accepted slope interval (default [-1.2, -0.85])"},
        {"relative_tolerance", "number", false, "allowed |gap N - 1| per point (default 0.2)"},
        {"end_tolerance", "number", false, "allowed |end gap - 1/N| (default 1e-2)"}}},
      {"rg_eigenvalue_flow",
       "charge eigenvalues q(g) of all seeds at evenly spaced couplings",
       {{"model", "string", true, "central_spin | constant_spacing | random_uniform"},
        {"n_sites", "int", true, "site count"},
        {"points", "int", false, "number of recorded couplings (default 5)"},
        {"g_target", "number", false, "path end (default 5 max spacing / N)"}}},
      {"xy_parent_check",
       "dense spectra of XY parent Hamiltonians at random in-phase points",
       {{"n_sites", "int", true, "chain length"},
        {"points", "int", false, "random (gamma, h) points (default 20)"},
        {"patterns", "int", false, "random occupation patterns per point (default 20)"}},
       true},
      {"xy_liom_bound",
       "LIOM Gram matrices and the LIOM parent gap bound",
       {{"sizes", "int[]", true, "chain lengths"},
        {"points", "int", false, "random (gamma, h) points (default 10)"},
        {"dense_max_n", "int", false, "largest N for the dense parent gap (default 6)"}},
       true},
      {"tba_sweep",
       "TBA dressing equations over a (delta, h) grid",
       {{"deltas", "number[]", true, "anisotropies in [0, 1)"},
        {"fields", "number[]", true, "magnetic fields h >= 0"},
        {"grid", "int", false, "rapidity points (default 1024)"},
        {"lambda_max", "number", false, "cutoff for h = 0 (default 40)"}}},
      {"xxz_ed_gaps",
       "XXZ sector gaps by exact diagonalization and their log-log slopes",
       {{"deltas", "number[]", true, "anisotropies"},
        {"sizes", "int[]", true, "even chain lengths"},
        {"sz_density", "number", false, "S^z per site of the sector (default 0.25)"},
        {"expected_slopes", "number[]", false, "one expected slope per delta"},
        {"slope_tolerances", "number[]", false, "one tolerance per delta"}}},
      {"smale_audit",
       "Smale root-separation bounds against true nearest-root distances",
       {{"model", "string", true, "central_spin | constant_spacing | random_uniform"},
        {"sizes", "int[]", true, "site counts"},
        {"stride", "int", false, "audit every stride-th accepted step (default 1)"}}},
      {"adiabatic_fidelity",
       "product-formula evolution under the RG parent Hamiltonian of one eigenstate",
       {{"model", "string", true, "central_spin | constant_spacing | random_uniform"},
        {"n_sites", "int", true, "site count"},
        {"state", "string", true, "seed bit string, site 1 first, 1 = spin up"},
        {"g_end", "number", false, "end coupling (default 1)"},
        {"T0", "number", false, "first evolution time (default 1)"},
        {"doublings", "int", false, "doublings of T (default 4)"},
        {"steps_per_unit_time", "int", false, "slices per unit time (default 400)"},
        {"fidelity_goal", "number", false, "target fidelity (default 0.99)"},
        {"max_search_doublings", "int", false, "doubling search limit (default 12)"},
        {"trotter_T", "number", false, "time of the step-size study (default 4)"},
        {"trotter_steps", "int[]", false, "step counts of the study (default 64..1024)"},
        {"trotter_order_range", "number[]", false, "accepted infidelity order (default [0.8, 1.2])"}}},
      {"entanglement_scan",
       "half-cut entanglement entropies of all RG eigenstates",
       {{"model", "string", true, "central_spin | constant_spacing | random_uniform"},
        {"n_sites", "int", true, "site count, at most 10"},
        {"g", "number", false, "coupling (default 1)"},
        {"cut", "int[]", false, "1-based sites of subsystem A (default first N/2)"}}},
  };
  return cat;
}

inline const ExperimentInfo& experiment_info(const std::string& name) {
  for (const auto& e : experiment_catalog())
    if (e.name == name) return e;
  throw ConfigError("unknown experiment '" + name + "'");
}

namespace detail {

inline bool type_matches(const json& v, const std::string& type) {
  auto all = [&](auto pred) { return v.is_array() && std::all_of(v.begin(), v.end(), pred); };
  if (type == "string") return v.is_string();
  if (type == "int") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "object") return v.is_object();
  if (type == "int[]") return all([](const json& x) { return x.is_number_integer(); });
  if (type == "number[]") return all([](const json& x) { return x.is_number(); });
  return false;
}

template <typename T>
T param(const json& p, const std::string& key, T fallback) {
  return p.contains(key) ? p.at(key).get<T>() : fallback;
}

}  // namespace detail

/// Parses and schema-checks a config document. Throws ConfigError.
inline ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> top = {"experiment", "params", "policy", "seed", "output_dir"};
  for (const auto& [k, v] : doc.items())
    if (!top.count(k)) throw ConfigError("unknown top-level field '" + k + "'");
  if (!doc.contains("experiment") || !doc["experiment"].is_string())
    throw ConfigError("field 'experiment' (string) is required");
  ExperimentConfig cfg;
  cfg.raw = doc;
  cfg.experiment = doc["experiment"].get<std::string>();
  const ExperimentInfo& info = experiment_info(cfg.experiment);
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) throw ConfigError("'params' must be an object");
    cfg.params = doc["params"];
  }
  if (doc.contains("policy")) {
    if (!doc["policy"].is_object()) throw ConfigError("'policy' must be an object");
    cfg.policy = doc["policy"];
    try {
      apply_overrides(ContinuationPolicy{}, cfg.policy);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("policy: ") + e.what());
    }
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("'seed' must be a nonnegative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ConfigError("'output_dir' must be a string");
    cfg.output_dir = doc["output_dir"].get<std::string>();
  }
  std::set<std::string> known;
  for (const auto& f : info.params) {
    known.insert(f.name);
    if (!cfg.params.contains(f.name)) {
      if (f.required) throw ConfigError(cfg.experiment + ": missing parameter '" + f.name + "'");
      continue;
    }
    if (!detail::type_matches(cfg.params[f.name], f.type))
      throw ConfigError(cfg.experiment + ": parameter '" + f.name + "' must be " + f.type);
  }
  for (const auto& [k, v] : cfg.params.items())
    if (!known.count(k)) throw ConfigError(cfg.experiment + ": unknown parameter '" + k + "'");
  const bool random_model =
      cfg.params.contains("model") && cfg.params["model"].get<std::string>() == "random_uniform";
  if ((info.randomized || random_model) && !cfg.seed)
    throw ConfigError(cfg.experiment + ": 'seed' is mandatory for randomized runs");
  if (cfg.params.contains("model")) {
    const auto m = cfg.params["model"].get<std::string>();
    if (m != "central_spin" && m != "constant_spacing" && m != "random_uniform")
      throw ConfigError(cfg.experiment + ": unknown model '" + m + "'");
  }
  return cfg;
}

inline RGModelSpec make_spec(const std::string& model, std::size_t n, std::uint64_t seed) {
  if (model == "central_spin") return RGModelSpec::central_spin(n);
  if (model == "constant_spacing") return RGModelSpec::constant_spacing(n);
  if (model == "random_uniform") return RGModelSpec::random_uniform(n, seed);
  throw ConfigError("unknown model '" + model + "'");
}

/// Path summary of one full-spectrum scan.
struct ScanSummary {
  std::size_t n = 0;
  double g_target = 0.0;
  double path_min_gap = 0.0;
  double g_at_min = 0.0;
  double end_gap = 0.0;
  std::size_t magnetization_violations = 0;
  double monotonicity_violation = 0.0;
  double max_residual_sq = 0.0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

inline ScanSummary summarize(const GapScan& scan) {
  ScanSummary s;
  s.n = scan.n_sites;
  s.g_target = scan.g_target;
  s.path_min_gap = scan.path_min.min_gap;
  s.g_at_min = scan.path_min.g;
  s.end_gap = scan.rows.back().min_gap;
  s.magnetization_violations = scan.magnetization_violations;
  s.monotonicity_violation = scan.max_monotonicity_violation();
  for (const auto& st : scan.final_states) s.max_residual_sq = std::max(s.max_residual_sq, st.residual_sq);
  s.accepted_steps = scan.accepted_steps;
  s.rejected_steps = scan.rejected_steps;
  return s;
}

/// Largest componentwise deviation between two sets of charge vectors after
/// greedy nearest matching; infinity if the matching is not one to one.
inline double spectrum_mismatch(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<char> used(b.size(), 0);
  double worst = 0.0;
  for (const auto& x : a) {
    std::size_t best = b.size();
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = (x - b[j]).cwiseAbs().maxCoeff();
      if (d < bd) bd = d, best = j;
    }
    if (used[best]) return std::numeric_limits<double>::infinity();
    used[best] = 1;
    worst = std::max(worst, bd);
  }
  return worst;
}

/// Seed word from a bit string with site 1 first.
inline std::uint64_t parse_seed_bits(const std::string& bits) {
  std::uint64_t s = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw ConfigError("state must be a string of 0 and 1");
    s = (s << 1) | static_cast<std::uint64_t>(c == '1');
  }
  return s;
}

/// Eigenvector of the joint charge spectrum whose charges are closest to q.
inline VectorC joint_eigenvector(const JointSpectrum& js, const Eigen::VectorXd& q) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < js.q.size(); ++i) {
    const double d = (js.q[i] - q).squaredNorm();
    if (d < bd) bd = d, best = i;
  }
  return js.vectors.col(static_cast<Eigen::Index>(best)).cast<cplx>();
}

struct TrotterStudy {
  std::vector<double> dts;
  std::vector<double> infidelity;  // 1 - |<ref|psi_dt>|^2
  std::vector<double> error_norm;  // min over phase of ||psi_dt - e^{i phi} ref||
  double infidelity_slope = 0.0;
  double error_norm_slope = 0.0;
};

/// Step-size study of one evolution against a reference with 16 times the
/// finest step count. Slopes are fitted on the three smallest steps.
inline TrotterStudy trotter_study(const VectorC& initial, const std::function<HamiltonianFamily()>& make_family,
                                  const Schedule& sched, std::vector<std::size_t> steps) {
  std::sort(steps.begin(), steps.end());
  if (steps.size() < 3) throw std::invalid_argument("trotter_study: need at least 3 step counts");
  const VectorC ref = evolve(initial, make_family(), sched, steps.back() * 16).final_state;
  TrotterStudy st;
  for (std::size_t s : steps) {
    const VectorC psi = evolve(initial, make_family(), sched, s).final_state;
    const cplx ov = ref.dot(psi);
    st.dts.push_back(sched.T / static_cast<double>(s));
    st.infidelity.push_back(1.0 - std::norm(ov));
    st.error_norm.push_back(std::sqrt(std::max(0.0, 2.0 - 2.0 * std::abs(ov))));
  }
  const std::size_t k = st.dts.size();
  const std::vector<double> x(st.dts.begin() + (k - 3), st.dts.end());
  st.infidelity_slope = loglog_slope(x, {st.infidelity.begin() + (k - 3), st.infidelity.end()}).slope;
  st.error_norm_slope = loglog_slope(x, {st.error_norm.begin() + (k - 3), st.error_norm.end()}).slope;
  return st;
}

/// Everything an experiment needs besides its parameters.
class ExperimentContext {
 public:
  ExperimentContext(const ExperimentConfig& cfg, std::filesystem::path out, unsigned threads)
      : cfg_(cfg), out_(std::move(out)), threads_(std::max(1u, threads)) {}

  const json& params() const { return cfg_.params; }
  std::uint64_t seed() const { return cfg_.seed.value_or(0); }
  unsigned threads() const { return threads_; }
  ContinuationPolicy policy(const RGModelSpec& spec) const { return apply_overrides(path_policy(spec), cfg_.policy); }

  std::string path(const std::string& file) {
    if (file.find('/') != std::string::npos || file.find("..") != std::string::npos)
      throw std::logic_error("artifact names must be plain file names");
    manifest_.push_back(file);
    return (out_ / file).string();
  }
  void write(const CsvTable& t, const std::string& file) { t.write(path(file)); }
  void write(const json& j, const std::string& file) { write_json(j, path(file)); }

  void check(RunReport& r, std::string name, bool ok, std::string detail) {
    r.assertions.push_back({std::move(name), ok, std::move(detail)});
  }
  const std::vector<std::string>& manifest() const { return manifest_; }

 private:
  const ExperimentConfig& cfg_;
  std::filesystem::path out_;
  unsigned threads_;
  std::vector<std::string> manifest_;
};

namespace experiments {

inline std::string fmt(double v) { return format_double(v); }

inline void rg_gap_scaling(ExperimentContext& ctx, RunReport& rep) {
  const auto& p = ctx.params();
  const auto model = p["model"].get<std::string>();
  const auto sizes = p["sizes"].get<std::vector<int>>();
  const double factor = detail::param(p, "g_target_factor", 5.0);
  const auto range = detail::param(p, "slope_range", std::vector<double>{-1.2, -0.85});
  const double rel = detail::param(p, "relative_tolerance", 0.2);
  const double end_tol = detail::param(p, "end_tolerance", 1e-2);
  if (range.size() != 2) throw ConfigError("slope_range needs two numbers");

  CsvTable t({"N", "min_path_gap", "g_at_min", "end_gap", "g_target", "accepted_steps", "rejected_steps"});
  std::vector<double> xs, ys;
  std::size_t mag = 0;
  double worst_rel = 0.0, worst_end = 0.0, worst_mono = 0.0;
  for (int n : sizes) {
    if (n < 3) throw ConfigError("sizes must be at least 3");
    const RGModelSpec spec = make_spec(model, static_cast<std::size_t>(n), ctx.seed());
    const ContinuationPolicy pol = ctx.policy(spec);
    const double gt = factor * spec.max_spacing() / n;
    ScanOptions so;
    so.threads = ctx.threads();
    const GapScan scan = full_spectrum_scan(spec, gt, pol, so);
    const ScanSummary s = summarize(scan);
    ctx.write(gap_scan_csv(scan), "scan_N" + std::to_string(n) + ".csv");
    ctx.write(gap_scan_sidecar(scan, spec, pol), "scan_N" + std::to_string(n) + ".json");
    t.row(n, s.path_min_gap, s.g_at_min, s.end_gap, gt, s.accepted_steps, s.rejected_steps);
    xs.push_back(n);
    ys.push_back(s.path_min_gap);
    mag += s.magnetization_violations;
    worst_rel = std::max(worst_rel, std::abs(s.path_min_gap * n - 1.0));
    worst_end = std::max(worst_end, std::abs(s.end_gap - 1.0 / n));
    worst_mono = std::max(worst_mono, s.monotonicity_violation);
  }
  ctx.write(t, "gap_scaling.csv");
  ctx.check(rep, "relative_deviation_from_1/N", worst_rel <= rel, "max |gap N - 1| = " + fmt(worst_rel));
  ctx.check(rep, "end_gap_near_1/N", worst_end <= end_tol, "max |end gap - 1/N| = " + fmt(worst_end));
  ctx.check(rep, "magnetization_bound", mag == 0, std::to_string(mag) + " violations");
  rep.summary["max_monotonicity_violation"] = worst_mono;
  if (xs.size() >= 3) {
    const SlopeFit f = loglog_slope(xs, ys);
    ctx.write(json{{"slope", f.slope}, {"stderr", f.stderr_}, {"intercept", f.intercept}}, "fit.json");
    ctx.check(rep, "loglog_slope_in_range", f.slope >= range[0] && f.slope <= range[1],
              "slope " + fmt(f.slope) + " +- " + fmt(f.stderr_));
    rep.summary["slope"] = f.slope;
  }
}

inline void rg_eigenvalue_flow(ExperimentContext& ctx, RunReport& rep) {
  const auto& p = ctx.params();
  const auto n = static_cast<std::size_t>(p["n_sites"].get<int>());
  const RGModelSpec spec = make_spec(p["model"].get<std::string>(), n, ctx.seed());
  const int points = detail::param(p, "points", 5);
  const double gt = detail::param(p, "g_target", default_g_target(spec));
  if (points < 1) throw ConfigError("points must be positive");
  ScanOptions so;
  so.threads = ctx.threads();
  for (int i = 1; i <= points; ++i) so.checkpoints.push_back(gt * i / points);
  const ContinuationPolicy pol = ctx.policy(spec);
  const GapScan scan = full_spectrum_scan(spec, gt, pol, so);

  CsvTable t({"g", "seed", "M", "k", "q"});
  double worst_res = 0.0, worst_ed = 0.0;
  for (const auto& [g, states] : scan.snapshots) {
    std::vector<Eigen::VectorXd> qs;
    for (const auto& s : states) {
      for (std::size_t k = 0; k < n; ++k)
        t.row(g, static_cast<unsigned long long>(s.seed), s.M, static_cast<unsigned long long>(k + 1),
              s.q(static_cast<Eigen::Index>(k)));
      worst_res = std::max(worst_res, qbe_residual(s.q, g, spec, s.M).squaredNorm());
      qs.push_back(s.q);
    }
    if (n <= 8) worst_ed = std::max(worst_ed, spectrum_mismatch(qs, joint_charge_spectrum(spec, g).q));
  }
  ctx.write(t, "eigenvalue_flow.csv");
  ctx.write(gap_scan_sidecar(scan, spec, pol), "scan.json");
  ctx.check(rep, "residuals_converged", worst_res < 1e-14, "max squared residual " + fmt(worst_res));
  if (n <= 8)
    ctx.check(rep, "matches_joint_diagonalization", worst_ed < 1e-8, "max deviation " + fmt(worst_ed));
}

/// Uniform draw of an in-phase point with gamma in [0.05, 2], h in [0, 2] and
/// |h - 1| >= 0.05.
template <typename Rng>
XYPoint random_in_phase(Rng& rng) {
  std::uniform_real_distribution<double> ug(0.05, 2.0), uh(0.0, 2.0);
  for (;;) {
    const double g = ug(rng), h = uh(rng);
    if (std::abs(h - 1.0) >= 0.05) return {g, h};
  }
}

inline void xy_parent_check(ExperimentContext& ctx, RunReport& rep) {
  const auto& p = ctx.params();
  const auto n = static_cast<std::size_t>(p["n_sites"].get<int>());
  const int points = detail::param(p, "points", 20), patterns = detail::param(p, "patterns", 20);
  std::mt19937_64 rng(ctx.seed());
  CsvTable t({"gamma", "h", "pattern", "ground_energy", "degeneracy", "gap", "integer_deviation"});
  double worst_gap = 0.0, worst_int = 0.0, worst_ground = 0.0;
  int degenerate = 0;
  for (int i = 0; i < points; ++i) {
    const XYPoint pt = random_in_phase(rng);
    for (int j = 0; j < patterns; ++j) {
      const auto pat = OccupationPattern::random(n, pt, rng);
      const SpectrumSummary s = xy_parent_spectrum(pat, n, pt);
      t.row(pt.gamma, pt.h, j, s.ground_energy, s.ground_degeneracy, s.gap, s.max_integer_deviation);
      worst_gap = std::max(worst_gap, std::abs(s.gap - 1.0));
      worst_int = std::max(worst_int, s.max_integer_deviation);
      worst_ground = std::max(worst_ground, std::abs(s.ground_energy));
      degenerate += s.ground_degeneracy != 1;
    }
  }
  ctx.write(t, "xy_parent.csv");
  ctx.check(rep, "unit_gap", worst_gap < 1e-9, "max |gap - 1| = " + fmt(worst_gap));
  ctx.check(rep, "integer_spectrum", worst_int < 1e-9, "max deviation " + fmt(worst_int));
  ctx.check(rep, "unique_zero_ground", degenerate == 0 && worst_ground < 1e-9,
            std::to_string(degenerate) + " degenerate, max |E0| " + fmt(worst_ground));
}

/// Largest off-diagonal Gram entry and largest diagonal deviation from
/// (N/2) eps(p)^2, over both sectors.
struct GramCheck {
  double offdiag = 0.0;
  double diag = 0.0;
};

inline GramCheck gram_check(std::size_t n, const XYPoint& pt) {
  const LiomMatrices lm = liom_matrices(n, pt);
  GramCheck c;
  for (int parity : {1, -1}) {
    const MatrixR& g = parity == 1 ? lm.gram_plus : lm.gram_minus;
    const auto ps = momenta(n, parity).momenta;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        if (i == j) {
          const double want = 0.5 * static_cast<double>(n) * std::pow(dispersion(ps[static_cast<std::size_t>(i)], pt), 2);
          c.diag = std::max(c.diag, std::abs(g(i, i) - want));
        } else {
          c.offdiag = std::max(c.offdiag, std::abs(g(i, j)));
        }
      }
  }
  return c;
}

inline void xy_liom_bound(ExperimentContext& ctx, RunReport& rep) {
  const auto& p = ctx.params();
  const auto sizes = p["sizes"].get<std::vector<int>>();
  const int points = detail::param(p, "points", 10);
  const int dense_max = detail::param(p, "dense_max_n", 6);
  std::mt19937_64 rng(ctx.seed());
  std::vector<XYPoint> pts;
  for (int i = 0; i < points; ++i) pts.push_back(random_in_phase(rng));
  CsvTable t({"N", "gamma", "h", "gram_offdiag", "gram_diag_deviation", "bound_grid", "bound_continuum",
              "dense_gap"});
  double worst_gram = 0.0;
  int dominance_failures = 0, dense_runs = 0;
  for (int n : sizes) {
    for (const auto& pt : pts) {
      const GramCheck gc = gram_check(static_cast<std::size_t>(n), pt);
      const LiomGapBound b = liom_gap_bound(static_cast<std::size_t>(n), pt);
      double gap = std::nan("");
      if (n <= dense_max) {
        const auto pat = OccupationPattern::random(static_cast<std::size_t>(n), pt, rng);
        const auto ev = to_dense(liom_parent(pat, static_cast<std::size_t>(n), pt)).eigenvalues();
        gap = ev(1) - ev(0);
        ++dense_runs;
        dominance_failures += b.grid > gap + 1e-9;
      }
      t.row(n, pt.gamma, pt.h, gc.offdiag, gc.diag, b.grid, b.continuum, gap);
      worst_gram = std::max({worst_gram, gc.offdiag, gc.diag});
    }
  }
  ctx.write(t, "liom_bound.csv");
  std::vector<double> gs, hs;
  for (int i = 1; i <= 20; ++i) gs.push_back(0.1 * i);
  for (int i = 0; i <= 20; ++i) hs.push_back(0.1 * i);
  ctx.write(gap_bound_sweep_csv(static_cast<std::size_t>(sizes.front()), gs, hs), "gap_bound_sweep.csv");
  ctx.check(rep, "gram_diagonal", worst_gram < 1e-10, "max Gram deviation " + fmt(worst_gram));
  ctx.check(rep, "bound_below_dense_gap", dominance_failures == 0,
            std::to_string(dominance_failures) + " of " + std::to_string(dense_runs) + " dense gaps below the bound");
}

inline void tba_sweep(ExperimentContext& ctx, RunReport& rep) {
  const auto& p = ctx.params();
  const auto deltas = p["deltas"].get<std::vector<double>>();
  const auto hs = p["fields"].get<std::vector<double>>();
  TBAInput base;
  base.grid = detail::param(p, "grid", base.grid);
  base.lambda_max = detail::param(p, "lambda_max", base.lambda_max);
  const auto profiles = iprep::tba_sweep(deltas, hs, base, ctx.threads());
  ctx.write(tba_sweep_csv(profiles), "tba_sweep.csv");
  double worst = 0.0, min_z2 = std::numeric_limits<double>::infinity();
  for (const auto& pr : profiles) {
    if (pr.saturated) continue;  // fully polarized, outside the critical phase
    min_z2 = std::min(min_z2, pr.zeta_sq);
    const double d = pr.input.delta;
    if (pr.input.h == 0.0)
      worst = std::max({worst, std::abs(pr.v_F - vf_zero_field(d)), std::abs(pr.zeta_sq - zeta_sq_zero_field(d))});
  }
  ctx.check(rep, "zero_field_limits", worst < 1e-3, "max deviation " + fmt(worst));
  ctx.check(rep, "dressed_charge_positive", min_z2 > 0.0, "min Z^2 " + fmt(min_z2));
}

inline void xxz_ed_gaps(ExperimentContext& ctx, RunReport& rep) {
  const auto& p = ctx.params();
  const auto deltas = p["deltas"].get<std::vector<double>>();
  const auto sizes = p["sizes"].get<std::vector<int>>();
  const double density = detail::param(p, "sz_density", 0.25);
  const auto expected = detail::param(p, "expected_slopes", std::vector<double>{});
  const auto tols = detail::param(p, "slope_tolerances", std::vector<double>{});
  if (!expected.empty() && (expected.size() != deltas.size() || tols.size() != deltas.size()))
    throw ConfigError("expected_slopes and slope_tolerances need one entry per delta");
  std::vector<GapRecord> recs(deltas.size() * sizes.size());
  parallel_for(recs.size(), ctx.threads(), [&](std::size_t i) {
    const int n = sizes[i % sizes.size()];
    const double m = 2.0 * density * n;
    if (std::abs(m - std::round(m)) > 1e-9 || (n + static_cast<int>(std::round(m))) % 2)
      throw ConfigError("sz_density incompatible with N = " + std::to_string(n));
    recs[i] = xxz_sector_gap(static_cast<std::size_t>(n), static_cast<int>(std::round(m)), deltas[i / sizes.size()]);
  });
  ctx.write(gap_records_csv(recs), "xxz_gaps.csv");
  CsvTable fits({"delta", "slope", "stderr"});
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    if (sizes.size() < 3) break;
    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < sizes.size(); ++j) {
      xs.push_back(sizes[j]);
      ys.push_back(recs[d * sizes.size() + j].gap);
    }
    const SlopeFit f = loglog_slope(xs, ys);
    fits.row(deltas[d], f.slope, f.stderr_);
    if (!expected.empty())
      ctx.check(rep, "slope_delta_" + fmt(deltas[d]), std::abs(f.slope - expected[d]) <= tols[d],
                "slope " + fmt(f.slope) + ", expected " + fmt(expected[d]) + " +- " + fmt(tols[d]));
  }
  ctx.write(fits, "xxz_slopes.csv");
  const bool nonneg = std::all_of(recs.begin(), recs.end(), [](const GapRecord& r) { return r.gap >= 0.0; });
  ctx.check(rep, "gaps_nonnegative", nonneg, "");
}

inline void smale_audit(ExperimentContext& ctx, RunReport& rep) {
  const auto& p = ctx.params();
  const auto model = p["model"].get<std::string>();
  const auto sizes = p["sizes"].get<std::vector<int>>();
  const int stride = detail::param(p, "stride", 1);
  if (stride < 1) throw ConfigError("stride must be positive");
  CsvTable t({"N", "g", "min_smale_bound", "min_true_distance", "violations", "cross_sector_excess"});
  CsvTable minima({"N", "min_smale_bound", "min_true_distance"});
  std::size_t total = 0, excess = 0;
  std::vector<double> bounds, dists;
  for (int n : sizes) {
    const RGModelSpec spec = make_spec(model, static_cast<std::size_t>(n), ctx.seed());
    double min_b = std::numeric_limits<double>::infinity(), min_d = min_b;
    int step = 0;
    ScanOptions so;
    so.threads = ctx.threads();
    so.observer = [&](double g, const MatrixXd& q, const std::vector<int>& M) {
      if (step++ % stride) return;
      const SmaleAudit a = smale_audit_step(q, M, g, spec);
      t.row(n, g, a.min_bound, a.min_distance, a.violations, a.cross_sector_excess);
      total += a.violations;
      excess += a.cross_sector_excess;
      min_b = std::min(min_b, a.min_bound);
      min_d = std::min(min_d, a.min_distance);
    };
    full_spectrum_scan(spec, default_g_target(spec), ctx.policy(spec), so);
    minima.row(n, min_b, min_d);
    bounds.push_back(min_b);
    dists.push_back(min_d);
  }
  ctx.write(t, "smale_audit.csv");
  ctx.write(minima, "smale_minima.csv");
  rep.summary["cross_sector_excess"] = excess;
  if (sizes.size() >= 2) {
    // Decay of the smallest bound against the decay of the smallest true distance.
    const double fb = bounds.back() / bounds.front(), fd = dists.back() / dists.front();
    rep.summary["bound_decay_factor"] = fb;
    rep.summary["distance_decay_factor"] = fd;
    ctx.check(rep, "bound_decays_faster_than_distance", fb < fd,
              "bound x" + fmt(fb) + " vs distance x" + fmt(fd) + " from smallest to largest N");
  }
  ctx.check(rep, "bound_below_true_distance", total == 0, std::to_string(total) + " violations");
}

inline void adiabatic_fidelity(ExperimentContext& ctx, RunReport& rep) {
  const auto& p = ctx.params();
  const auto n = static_cast<std::size_t>(p["n_sites"].get<int>());
  const RGModelSpec spec = make_spec(p["model"].get<std::string>(), n, ctx.seed());
  const auto state_bits = p["state"].get<std::string>();
  if (state_bits.size() != n) throw ConfigError("state must have n_sites bits");
  const std::uint64_t seed = parse_seed_bits(state_bits);
  const double g_end = detail::param(p, "g_end", 1.0);
  const double T0 = detail::param(p, "T0", 1.0);
  const int doublings = detail::param(p, "doublings", 4);
  const int per_unit = detail::param(p, "steps_per_unit_time", 400);
  const double goal = detail::param(p, "fidelity_goal", 0.99);
  const int max_search = detail::param(p, "max_search_doublings", 12);
  const double trotter_T = detail::param(p, "trotter_T", 4.0);
  const auto tsteps = detail::param(p, "trotter_steps", std::vector<std::size_t>{64, 128, 256, 512, 1024});
  const auto order_range = detail::param(p, "trotter_order_range", std::vector<double>{0.8, 1.2});
  if (!(T0 > 0.0) || per_unit < 1 || doublings < 1) throw ConfigError("T0, doublings and steps must be positive");

  const ContinuationPolicy pol = ctx.policy(spec);
  const BetheState end = continue_solution(seed, spec, g_end, pol).states.back();
  const JointSpectrum js = joint_charge_spectrum(spec, g_end);
  const VectorC target = joint_eigenvector(js, end.q);
  const VectorC psi0 = seed_product_state(seed, n);
  auto family = [&] { return HamiltonianFamily(RGParentFamily(spec, seed, pol)); };
  auto run = [&](double T, EvolveOptions o = {}) {
    o.target = [&](double) { return target; };
    const auto steps = static_cast<std::size_t>(std::ceil(T * per_unit));
    return evolve(psi0, family(), Schedule{0.0, g_end, T}, steps, o);
  };

  std::vector<std::pair<double, EvolutionReport>> sweep(static_cast<std::size_t>(doublings) + 1);
  parallel_for(sweep.size(), ctx.threads(), [&](std::size_t j) {
    const double T = T0 * std::ldexp(1.0, static_cast<int>(j));
    EvolveOptions o;
    o.checkpoint_every = static_cast<std::size_t>(std::ceil(T * per_unit / 10.0));
    sweep[j] = {T, run(T, o)};
  });
  ctx.write(fidelity_csv(sweep), "fidelity_vs_T.csv");
  json cps = json::array();
  for (const auto& [T, r] : sweep) cps.push_back(checkpoints_json(r, Schedule{0.0, g_end, T}));
  ctx.write(cps, "checkpoints.json");

  int worsening = 0;
  double drift = 0.0;
  for (std::size_t j = 0; j < sweep.size(); ++j) {
    drift = std::max(drift, sweep[j].second.max_norm_drift);
    if (j && 1.0 - sweep[j].second.final_fidelity > 1.05 * (1.0 - sweep[j - 1].second.final_fidelity)) ++worsening;
  }
  ctx.check(rep, "infidelity_monotone_in_T", worsening == 0, std::to_string(worsening) + " increases beyond 5%");
  ctx.check(rep, "unitarity", drift < 1e-10, "max norm drift " + fmt(drift));

  double found = std::nan(""), found_f = 0.0;
  for (int j = 0; j <= max_search; ++j) {
    const double T = T0 * std::ldexp(1.0, j);
    const double f = j < static_cast<int>(sweep.size()) ? sweep[static_cast<std::size_t>(j)].second.final_fidelity
                                                        : run(T).final_fidelity;
    if (f >= goal) {
      found = T;
      found_f = f;
      break;
    }
  }
  ctx.check(rep, "doubling_search_reaches_goal", !std::isnan(found),
            "T = " + fmt(found) + ", fidelity " + fmt(found_f));
  rep.summary["T_goal"] = std::isnan(found) ? json(nullptr) : json(found);

  const TrotterStudy ts = trotter_study(psi0, family, Schedule{0.0, g_end, trotter_T}, tsteps);
  CsvTable tt({"dt", "infidelity_vs_reference", "state_error_norm"});
  for (std::size_t i = 0; i < ts.dts.size(); ++i) tt.row(ts.dts[i], ts.infidelity[i], ts.error_norm[i]);
  ctx.write(tt, "trotter_study.csv");
  rep.summary["infidelity_slope"] = ts.infidelity_slope;
  rep.summary["error_norm_slope"] = ts.error_norm_slope;
  ctx.check(rep, "trotter_infidelity_order",
            ts.infidelity_slope >= order_range.at(0) && ts.infidelity_slope <= order_range.at(1),
            "infidelity slope " + fmt(ts.infidelity_slope) + ", state error slope " + fmt(ts.error_norm_slope));
}

inline void entanglement_scan(ExperimentContext& ctx, RunReport& rep) {
  const auto& p = ctx.params();
  const auto n = static_cast<std::size_t>(p["n_sites"].get<int>());
  const RGModelSpec spec = make_spec(p["model"].get<std::string>(), n, ctx.seed());
  const double g = detail::param(p, "g", 1.0);
  std::vector<std::size_t> cut;
  if (p.contains("cut")) cut = p["cut"].get<std::vector<std::size_t>>();
  else
    for (std::size_t i = 1; i <= n / 2; ++i) cut.push_back(i);
  const JointSpectrum js = joint_charge_spectrum(spec, g, ctx.seed() + 1);
  std::vector<double> s(js.q.size());
  parallel_for(s.size(), ctx.threads(), [&](std::size_t i) {
    s[i] = entanglement_entropy(js.vectors.col(static_cast<Eigen::Index>(i)).cast<cplx>(), n, cut);
  });
  ctx.write(entropy_csv(n, s), "entropy.csv");
  const double cap = static_cast<double>(std::min(cut.size(), n - cut.size())) * std::log(2.0);
  const bool ok = std::all_of(s.begin(), s.end(), [&](double x) { return x >= -1e-12 && x <= cap + 1e-12; });
  ctx.check(rep, "entropy_bounds", ok, "cap " + fmt(cap));
  rep.summary["max_entropy"] = *std::max_element(s.begin(), s.end());
}

}  // namespace experiments

using ExperimentFn = std::function<void(ExperimentContext&, RunReport&)>;

inline const std::map<std::string, ExperimentFn>& experiment_registry() {
  static const std::map<std::string, ExperimentFn> reg = {
      {"rg_gap_scaling", experiments::rg_gap_scaling},
      {"rg_eigenvalue_flow", experiments::rg_eigenvalue_flow},
      {"xy_parent_check", experiments::xy_parent_check},
      {"xy_liom_bound", experiments::xy_liom_bound},
      {"tba_sweep", experiments::tba_sweep},
      {"xxz_ed_gaps", experiments::xxz_ed_gaps},
      {"smale_audit", experiments::smale_audit},
      {"adiabatic_fidelity", experiments::adiabatic_fidelity},
      {"entanglement_scan", experiments::entanglement_scan},
  };
  return reg;
}

/// Runs a parsed config, writing artifacts under out_dir. The caller has
/// already validated the config; `input_hash` is recorded verbatim.
inline RunReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                unsigned threads, std::string input_hash = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);
  RunReport rep;
  rep.config = cfg.raw;
  rep.input_hash = std::move(input_hash);
  ExperimentContext ctx(cfg, out_dir, threads);
  experiment_registry().at(cfg.experiment)(ctx, rep);
  rep.manifest = ctx.manifest();
  rep.manifest.push_back("report.json");
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(rep.to_json(), (out_dir / "report.json").string());
  return rep;
}

}  // namespace iprep
