#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gkdv/ground_state.hpp"
#include "gkdv/modulation.hpp"
#include "gkdv/pde.hpp"
#include "gkdv/placement.hpp"
#include "gkdv/profile.hpp"
#include "gkdv/report.hpp"
#include "gkdv/sync.hpp"

namespace fs = std::filesystem;
using namespace gkdv;

namespace {

double parse_number(const std::string& text, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || !std::isfinite(v))
    throw usage_error(what + ": expected a number, got \"" + text + "\"");
  return v;
}

long parse_integer(const std::string& text, const std::string& what) {
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (end == text.c_str() || *end != '\0')
    throw usage_error(what + ": expected an integer, got \"" + text + "\"");
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const std::string& item : split(text, ','))
    out.push_back(parse_number(item, what));
  return out;
}

// Key/value settings merged from a config file; every key must be consumed,
// so typos surface as usage errors instead of silently applying defaults.
class Config {
public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw usage_error("config: cannot open " + path);
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      const size_t start = line.find_first_not_of(" \t");
      if (start == std::string::npos || line[start] == '#') continue;
      const size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw usage_error("config: line " + std::to_string(lineno) + " lacks key=value");
      auto trim = [](std::string s) {
        const size_t a = s.find_first_not_of(" \t");
        const size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (key.empty())
        throw usage_error("config: line " + std::to_string(lineno) + " has an empty key");
      cfg.kv_[key] = val;
    }
    return cfg;
  }

  double number(const std::string& key, double def) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    used_.insert(key);
    return parse_number(it->second, "config key " + key);
  }

  long integer(const std::string& key, long def) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    used_.insert(key);
    return parse_integer(it->second, "config key " + key);
  }

  std::string str(const std::string& key, const std::string& def) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    used_.insert(key);
    return it->second;
  }

  // call after all keys were pulled; leftovers are mistakes
  void finish() const {
    for (const auto& [key, val] : kv_)
      if (!used_.count(key)) throw usage_error("config: unknown key " + key);
  }

private:
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> used_;
};

// Shared per-invocation plumbing: output directory, config file, seed echo,
// worker cap from the environment.
struct RunContext {
  std::string out_dir = ".";
  std::string config_path;
  long seed = 0;

  Config load() const {
    return config_path.empty() ? Config() : Config::from_file(config_path);
  }

  int threads() const {
    const char* env = std::getenv("GKDV_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    const long n = parse_integer(env, "GKDV_THREADS");
    if (n < 1) throw usage_error("GKDV_THREADS: must be a positive integer");
    return static_cast<int>(n);
  }

  void stamp(RunReport& rep) const {
    rep.config["seed"] = std::to_string(seed);
    rep.config["threads"] = std::to_string(threads());
  }

  std::string path(const std::string& name) const {
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
  }

  void emit(RunReport& rep, const std::string& name) const {
    rep.write(path(name));
    std::printf("%s\n", path(name).c_str());
  }
};

void run_groundstate(const RunContext& ctx, double p, bool check_identities) {
  Config cfg = ctx.load();
  const double half_width = cfg.number("half_width", 25.0);
  const long n = cfg.integer("n", 4001);
  cfg.finish();

  GroundState gs(p);
  Grid g(-half_width, half_width, static_cast<int>(n), false);
  Field q = eval_ground_state(gs, g);

  RunReport rep;
  rep.subcommand = "groundstate";
  ctx.stamp(rep);
  rep.config["p"] = format_full(p);
  rep.config["half_width"] = format_full(half_width);
  rep.config["n"] = std::to_string(n);
  rep.config["check_identities"] = check_identities ? "true" : "false";

  MassEnergy me = mass_energy(q, p);
  rep.put_scalar("mass", "mass_energy", me.mass);
  rep.put_scalar("energy", "mass_energy", me.energy);
  rep.put_scalar("mass_l1_ratio", "mass_to_l1_ratio", mass_to_l1_ratio(gs, g));

  if (check_identities) {
    Field d2 = derivative(q, 2, 6);
    double ode_res = 0.0;
    for (int i = 0; i < g.n; ++i) {
      const double y = g.point(i);
      if (std::abs(y) > half_width - 1.0) continue; // one-sided stencil collar
      ode_res = std::max(ode_res, std::abs(d2[i] - q[i] + std::pow(q[i], p)));
    }
    rep.put_scalar("ode_residual", "derivative", ode_res);

    Field qprime = Field::sample(g, [&](double y) { return gs.deriv(y); });
    Field lam_q = Field::sample(g, [&](double y) { return gs.lambda_Q(y); });
    Field k1 = apply_linearized(gs, qprime);
    Field k2 = apply_linearized(gs, lam_q);
    double kernel = 0.0, lambda_id = 0.0;
    for (int i = 0; i < g.n; ++i) {
      const double y = g.point(i);
      if (std::abs(y) > half_width - 1.0) continue;
      kernel = std::max(kernel, std::abs(k1[i]));
      lambda_id = std::max(lambda_id, std::abs(k2[i] + 2.0 * q[i]));
    }
    rep.put_scalar("kernel_residual", "apply_linearized", kernel);
    rep.put_scalar("scaling_identity_residual", "apply_linearized", lambda_id);
  }

  std::vector<std::vector<double>> rows;
  for (int i = 0; i < g.n; ++i) rows.push_back({g.point(i), q[i]});
  write_csv(ctx.path("groundstate_profile.csv"), {"y", "Q"}, rows);
  rep.csv_paths.push_back("groundstate_profile.csv");
  ctx.emit(rep, "groundstate_report.json");
}

void run_profile(const RunContext& ctx, double p, double b, bool find_eigenvalue,
                 bool localized, double bc_flag) {
  Config cfg = ctx.load();
  const double h = cfg.number("h", 0.01);
  cfg.finish();

  RunReport rep;
  rep.subcommand = "profile";
  ctx.stamp(rep);
  rep.config["p"] = format_full(p);
  rep.config["h"] = format_full(h);
  rep.config["find_bc"] = find_eigenvalue ? "true" : "false";
  rep.config["localize"] = localized ? "true" : "false";

  ProfileSolution sol;
  double b_c = bc_flag;
  if (find_eigenvalue) {
    BcResult bc = find_bc(p, h);
    sol = bc.sol;
    b_c = bc.b_c;
    rep.put_scalar("b_c", "find_bc", bc.b_c);
    rep.put_scalar("eigenvalue_slope", "find_bc", bc.curve.C_p);
  } else {
    if (!(b > 0.0)) throw usage_error("profile: need --b > 0 or --find-bc");
    sol = solve_profile(p, b, profile_grid(b, h));
  }
  rep.config["b"] = format_full(sol.b);
  rep.put_scalar("gamma", "solve_profile", sol.gamma);
  rep.put_scalar("profile_residual", "solve_profile", sol.residual_norm);

  std::vector<std::vector<double>> rows;
  for (int i = 0; i < sol.v.grid.n; ++i) rows.push_back({sol.v.grid.point(i), sol.v[i]});
  write_csv(ctx.path("profile_solution.csv"), {"y", "v"}, rows);
  rep.csv_paths.push_back("profile_solution.csv");

  if (localized) {
    if (!(b_c > 0.0))
      throw usage_error("profile: --localize needs --bc or --find-bc for the cutoff");
    rep.config["b_c"] = format_full(b_c);
    LocalizedProfile prof = localize(sol, b_c);
    MassEnergy me = mass_energy(prof.Q_b, p);
    rep.put_scalar("localized_mass", "mass_energy", me.mass);
    rep.put_scalar("localized_energy", "mass_energy", me.energy);

    GroundState gs(p);
    const Grid& gp = prof.P_b.grid;
    Field qp = Field::sample(gp, [&](double y) { return gs(y); });
    rep.put_scalar("detuning_pairing", "localize", inner(prof.P_b, qp));

    std::vector<std::vector<double>> lrows;
    const Grid& gq = prof.Q_b.grid;
    for (int i = 0; i < gq.n; ++i) {
      const double y = gq.point(i);
      lrows.push_back({y, prof.Q_b[i], prof.p_at(y)});
    }
    write_csv(ctx.path("localized_profile.csv"), {"y", "Q_b", "P_b"}, lrows);
    rep.csv_paths.push_back("localized_profile.csv");
  }
  ctx.emit(rep, "profile_report.json");
}

Field initial_condition(Config& cfg, const Grid& g, double p) {
  const std::string ic = cfg.str("ic", "");
  if (ic == "soliton") {
    const double speed = cfg.number("speed", 1.0);
    const double x0 = cfg.number("x0", 0.0);
    if (!(speed > 0.0)) throw usage_error("evolve: soliton speed must be positive");
    GroundState gs(p);
    const double amp = std::pow(speed, 1.0 / (p - 1.0));
    const double root = std::sqrt(speed);
    return Field::sample(g, [&](double x) { return amp * gs(root * (x - x0)); });
  }
  if (ic == "gaussian") {
    const double amp = cfg.number("amplitude", 0.1);
    const double width = cfg.number("width", 2.0);
    const double x0 = cfg.number("x0", 0.0);
    if (!(width > 0.0)) throw usage_error("evolve: gaussian width must be positive");
    return Field::sample(
        g, [&](double x) { return amp * std::exp(-(x - x0) * (x - x0) / (width * width)); });
  }
  if (ic == "bubbles") {
    const double b_c = cfg.number("bc", 0.0228);
    const double b = cfg.number("prof_b", b_c);
    const double h = cfg.number("prof_h", 0.01);
    const std::string spec = cfg.str("bubbles", "");
    if (spec.empty()) throw usage_error("evolve: ic=bubbles needs a bubbles list");
    std::vector<BubbleParams> bubbles;
    for (const std::string& item : split(spec, ';')) {
      std::vector<double> vals = parse_list(item, "config key bubbles");
      if (vals.size() != 3)
        throw usage_error("evolve: each bubble needs lambda,b,x");
      bubbles.push_back({vals[0], vals[1], vals[2]});
    }
    LocalizedProfile prof = localize(solve_profile(p, b, profile_grid(b, h)), b_c);
    return synthesize(g, bubbles, prof);
  }
  throw usage_error("evolve: ic must be one of soliton, gaussian, bubbles");
}

void run_evolve(const RunContext& ctx) {
  Config cfg = ctx.load();
  EvolutionConfig ec;
  ec.p = cfg.number("p", 5.0);
  const double x_min = cfg.number("x_min", -50.0);
  const double x_max = cfg.number("x_max", 50.0);
  const long n = cfg.integer("n", 2048);
  ec.grid = Grid(x_min, x_max, static_cast<int>(n), true);
  ec.t_end = cfg.number("t_end", 1.0);
  ec.fixed_dt = cfg.number("dt", 0.0);
  ec.safety = cfg.number("safety", 0.5);
  ec.min_scale = cfg.number("min_scale", 0.0);
  ec.gradient_cap = cfg.number("gradient_cap", 0.0);
  ec.diag_stride = static_cast<int>(cfg.integer("diag_stride", 8));
  ec.sponge = cfg.integer("sponge", 0) != 0;
  ec.sponge_width_frac = cfg.number("sponge_width_frac", 0.05);
  ec.sponge_strength = cfg.number("sponge_strength", 1.0);

  Field u0 = initial_condition(cfg, ec.grid, ec.p);
  cfg.finish();

  RunReport rep;
  rep.subcommand = "evolve";
  ctx.stamp(rep);
  rep.config["p"] = format_full(ec.p);
  rep.config["x_min"] = format_full(x_min);
  rep.config["x_max"] = format_full(x_max);
  rep.config["n"] = std::to_string(n);
  rep.config["t_end"] = format_full(ec.t_end);
  rep.config["dt"] = format_full(ec.fixed_dt);
  rep.config["safety"] = format_full(ec.safety);
  rep.config["sponge"] = ec.sponge ? "true" : "false";

  EvolveResult res = evolve(u0, ec);
  rep.put_scalar("t_final", "evolve", res.t_final);
  rep.put_scalar("steps", "evolve", static_cast<double>(res.steps));

  const DiagnosticsSample& first = res.series.front();
  const DiagnosticsSample& last = res.series.back();
  rep.put_scalar("mass_drift", "evolve", std::abs(last.mass - first.mass));
  rep.put_scalar("energy_drift", "evolve", std::abs(last.energy - first.energy));

  std::vector<std::vector<double>> rows;
  for (const DiagnosticsSample& s : res.series)
    rows.push_back({s.t, s.mass, s.energy, s.e2, s.grad_norm});
  write_csv(ctx.path("evolve_diagnostics.csv"), {"t", "mass", "energy", "e2", "grad_norm"},
            rows);
  rep.csv_paths.push_back("evolve_diagnostics.csv");
  ctx.emit(rep, "evolve_report.json");
}

std::vector<BubbleParams> parse_bubbles(const std::string& spec, const std::string& what) {
  if (spec.empty()) throw usage_error(what + ": needs a bubbles list");
  std::vector<BubbleParams> bubbles;
  for (const std::string& item : split(spec, ';')) {
    std::vector<double> vals = parse_list(item, what);
    if (vals.size() != 3) throw usage_error(what + ": each bubble needs lambda,b,x");
    bubbles.push_back({vals[0], vals[1], vals[2]});
  }
  return bubbles;
}

void run_decompose(const RunContext& ctx) {
  Config cfg = ctx.load();
  const double p = cfg.number("p", 5.1);
  const double b_c = cfg.number("bc", 0.0228);
  const double b = cfg.number("prof_b", b_c);
  const double h = cfg.number("prof_h", 0.01);
  const double x_min = cfg.number("x_min", -200.0);
  const double x_max = cfg.number("x_max", 200.0);
  const long n = cfg.integer("n", 8192);
  const double tol = cfg.number("tol", 0.0);
  std::vector<BubbleParams> bubbles = parse_bubbles(cfg.str("bubbles", "1,0.0228,0"),
                                                    "decompose");
  cfg.finish();

  RunReport rep;
  rep.subcommand = "decompose";
  ctx.stamp(rep);
  rep.config["p"] = format_full(p);
  rep.config["bc"] = format_full(b_c);
  rep.config["prof_b"] = format_full(b);
  rep.config["x_min"] = format_full(x_min);
  rep.config["x_max"] = format_full(x_max);
  rep.config["n"] = std::to_string(n);
  rep.config["tol"] = format_full(tol);

  LocalizedProfile prof = localize(solve_profile(p, b, profile_grid(b, h)), b_c);
  Grid g(x_min, x_max, static_cast<int>(n), true);
  Field u = synthesize(g, bubbles, prof);
  Decomposition dec = decompose(u, bubbles, prof, tol);

  rep.put_scalar("max_orthogonality_defect", "decompose", dec.max_ortho());
  rep.put_scalar("leftover_sup", "decompose", sup_norm(dec.residual));
  std::vector<std::vector<double>> rows;
  for (size_t j = 0; j < dec.bubbles.size(); ++j) {
    const BubbleParams& bp = dec.bubbles[j];
    rows.push_back({static_cast<double>(j + 1), bp.lambda, bp.b, bp.x});
    const std::string tag = "bubble_" + std::to_string(j + 1) + "_";
    rep.put_scalar(tag + "lambda", "decompose", bp.lambda);
    rep.put_scalar(tag + "b", "decompose", bp.b);
    rep.put_scalar(tag + "x", "decompose", bp.x);
  }
  write_csv(ctx.path("decompose_bubbles.csv"), {"bubble", "lambda", "b", "x"}, rows);
  rep.csv_paths.push_back("decompose_bubbles.csv");
  ctx.emit(rep, "decompose_report.json");
}

void run_sync(const RunContext& ctx, int k, const std::string& runner_name,
              const std::string& b_list) {
  Config cfg = ctx.load();
  if (k < 2) throw usage_error("sync: needs --k >= 2");
  std::vector<double> b = parse_list(b_list, "sync --b");
  if (static_cast<int>(b.size()) != k)
    throw usage_error("sync: --b must list exactly k drift values");

  const double lambda1 = cfg.number("lambda1", 1.0);
  const double b_c = cfg.number("bc", 0.0228);
  const double c_p = cfg.number("cp", 2.0);
  const double separation = cfg.number("separation", 8.0 / b_c);

  SyncTemplate tpl;
  tpl.bracket_lo = cfg.number("bracket_lo", 0.5);
  tpl.bracket_hi = cfg.number("bracket_hi", 2.0);
  tpl.max_iter = static_cast<int>(cfg.integer("max_iter", 80));

  // seed the scale guesses with the frozen-drift closed form
  std::vector<double> guess = reduced_sync(lambda1, b);
  for (int j = 0; j < k; ++j)
    tpl.init.push_back({guess[static_cast<size_t>(j)], b[static_cast<size_t>(j)],
                        separation * static_cast<double>(j)});

  RunReport rep;
  rep.subcommand = "sync";
  ctx.stamp(rep);
  rep.config["k"] = std::to_string(k);
  rep.config["runner"] = runner_name;
  rep.config["b"] = b_list;
  rep.config["lambda1"] = format_full(lambda1);
  rep.config["bc"] = format_full(b_c);
  rep.config["cp"] = format_full(c_p);
  rep.config["separation"] = format_full(separation);

  SyncResult sr;
  if (runner_name == "reduced") {
    tpl.rel_tol = cfg.number("rel_tol", 1e-9);
    const std::string model = cfg.str("model", "formal");
    if (model != "formal" && model != "damped")
      throw usage_error("sync: model must be formal or damped");
    ReducedRunner rr;
    rr.model = model == "formal" ? ReducedModel::formal : ReducedModel::damped;
    rr.b_c = b_c;
    rr.c_p = c_p;
    rr.floor_frac = cfg.number("floor_frac", 1e-7);
    cfg.finish();
    rep.config["model"] = model;
    rep.config["rel_tol"] = format_full(tpl.rel_tol);
    sr = solve_sync(tpl, rr, BandPolicy(k));
  } else if (runner_name == "pde") {
    tpl.rel_tol = cfg.number("rel_tol", 1e-3);
    const double p = cfg.number("p", 5.1);
    const double prof_b = cfg.number("prof_b", b_c);
    const double prof_h = cfg.number("prof_h", 0.01);
    const double x_min = cfg.number("x_min", -512.0);
    const double x_max = cfg.number("x_max", 512.0);
    const long n = cfg.integer("n", 32768);
    const double t_cap = cfg.number("t_cap", 50.0);
    PdeRunner pr;
    LocalizedProfile prof = localize(solve_profile(p, prof_b, profile_grid(prof_b, prof_h)),
                                     b_c);
    pr.prof = &prof;
    pr.box = Grid(x_min, x_max, static_cast<int>(n), true);
    pr.cfg.p = p;
    pr.cfg.t_end = t_cap;
    pr.policy = BandPolicy(k);
    pr.stop_scale_frac = cfg.number("stop_scale_frac", 1.0 / 3.2);
    pr.retrack_frac = cfg.number("retrack_frac", 0.001);
    cfg.finish();
    rep.config["rel_tol"] = format_full(tpl.rel_tol);
    rep.config["p"] = format_full(p);
    sr = solve_sync(tpl, pr, BandPolicy(k));
  } else {
    throw usage_error("sync: runner must be reduced or pde");
  }

  for (int j = 0; j < k; ++j)
    rep.put_scalar("lambda_" + std::to_string(j + 1) + "_star", "solve_sync",
                   sr.scales[static_cast<size_t>(j)]);
  rep.put_scalar("runner_calls", "solve_sync", static_cast<double>(sr.runner_calls));
  rep.payload["final_classification"] = to_string(sr.final_class);
  rep.payload["history"] = nlohmann::json::array();
  std::vector<std::vector<double>> rows;
  for (const BisectStep& st : sr.history) {
    rep.payload["history"].push_back({{"bubble", st.bubble + 1},
                                      {"candidate", st.candidate},
                                      {"classification", to_string(st.cls)}});
    const double code = st.cls == Classification::below
                            ? -1.0
                            : (st.cls == Classification::above ? 1.0 : 0.0);
    rows.push_back({static_cast<double>(st.bubble + 1), st.candidate, code});
  }
  write_csv(ctx.path("sync_history.csv"), {"bubble", "candidate", "classification"}, rows);
  rep.csv_paths.push_back("sync_history.csv");
  ctx.emit(rep, "sync_report.json");
}

void run_place(const RunContext& ctx, const std::string& targets_list,
               const std::string& runner_name, double threshold_flag) {
  Config cfg = ctx.load();
  std::vector<double> targets = parse_list(targets_list, "place --targets");
  const int k = static_cast<int>(targets.size());
  const double b_c = cfg.number("bc", 0.0228);
  const double threshold = threshold_flag > 0.0 ? threshold_flag
                                                : cfg.number("threshold", 8.0 / b_c);
  const double lambda1 = cfg.number("lambda1", 1.0);
  const double c_p = cfg.number("cp", 2.0);
  const double theta = cfg.number("theta", 1.0);
  const int max_iter = static_cast<int>(cfg.integer("max_iter", 20));
  const double tol = cfg.number("tol", 1e-6);
  const double floor = cfg.number("floor", 1e-2);

  // drift defaults slightly above the eigenvalue, one notch per bubble
  std::vector<double> b(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j)
    b[static_cast<size_t>(j)] = b_c * (1.0 + 0.1 * static_cast<double>(j + 1) * b_c);
  const std::string b_spec = cfg.str("b", "");
  if (!b_spec.empty()) {
    b = parse_list(b_spec, "config key b");
    if (static_cast<int>(b.size()) != k)
      throw usage_error("place: config key b must list one drift per target");
  }

  if (runner_name != "reduced")
    throw usage_error("place: only the reduced runner is wired in the cli");
  cfg.finish();

  RunReport rep;
  rep.subcommand = "place";
  ctx.stamp(rep);
  rep.config["targets"] = targets_list;
  rep.config["runner"] = runner_name;
  rep.config["bc"] = format_full(b_c);
  rep.config["threshold"] = format_full(threshold);
  rep.config["theta"] = format_full(theta);
  rep.config["max_iter"] = std::to_string(max_iter);
  rep.config["tol"] = format_full(tol);

  ScalingReduction red = reduce_by_scaling(targets, threshold);
  rep.put_scalar("lambda_bar", "reduce_by_scaling", red.lambda_bar);

  BlowupEstimate last_est;
  auto M = [&](const std::vector<double>& x0) {
    std::vector<double> lam = reduced_sync(lambda1, b);
    std::vector<BubbleParams> init;
    for (int j = 0; j < k; ++j)
      init.push_back({lam[static_cast<size_t>(j)], b[static_cast<size_t>(j)],
                      x0[static_cast<size_t>(j)]});
    ReducedTrajectory traj =
        reduced_flow(init, ReducedModel::formal, 1e6, b_c, c_p, 1e-12, floor);
    ParamTrack track{traj.t, traj.samples};
    last_est = estimate_blowup_data(track);
    return last_est.x_T;
  };

  PlacementProblem prob;
  prob.targets = red.scaled;
  prob.threshold = threshold;
  prob.scale_bar = red.lambda_bar;
  PlacementResult pr = place(prob, M, max_iter, theta, tol);

  rep.put_scalar("residual", "place", pr.residual);
  rep.put_scalar("iterations", "place", static_cast<double>(pr.iterations));
  rep.put_scalar("T_est", "estimate_blowup_data", red.unscale_time(last_est.T));
  for (int j = 0; j < k; ++j) {
    const std::string tag = "target_" + std::to_string(j + 1) + "_";
    rep.put_scalar(tag + "center", "place",
                   red.unscale_position(pr.centers[static_cast<size_t>(j)]));
    rep.put_scalar(tag + "achieved", "place",
                   red.unscale_position(pr.achieved[static_cast<size_t>(j)]));
  }

  std::vector<std::string> cols{"iteration", "residual"};
  for (int j = 0; j < k; ++j) cols.push_back("center_" + std::to_string(j + 1));
  for (int j = 0; j < k; ++j) cols.push_back("achieved_" + std::to_string(j + 1));
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < pr.history.size(); ++i) {
    std::vector<double> row{static_cast<double>(i), pr.history[i].residual};
    for (double c : pr.history[i].centers) row.push_back(c);
    for (double a : pr.history[i].achieved) row.push_back(a);
    rows.push_back(std::move(row));
  }
  write_csv(ctx.path("place_history.csv"), cols, rows);
  rep.csv_paths.push_back("place_history.csv");

  // the accepting evaluation doubles as the verification run; its estimates
  // get their own report, referenced by path
  RunReport verify;
  verify.subcommand = "place-verify";
  ctx.stamp(verify);
  verify.config["targets"] = targets_list;
  for (int j = 0; j < k; ++j) {
    const std::string tag = "bubble_" + std::to_string(j + 1) + "_";
    verify.put_scalar(tag + "T", "estimate_blowup_data",
                      red.unscale_time(last_est.T_j[static_cast<size_t>(j)]));
    verify.put_scalar(tag + "x_T", "estimate_blowup_data",
                      red.unscale_position(last_est.x_T[static_cast<size_t>(j)]));
    verify.put_scalar(tag + "fit_r2", "estimate_blowup_data",
                      last_est.r2[static_cast<size_t>(j)]);
  }
  verify.write(ctx.path("place_verification.json"));
  rep.payload["verification_report"] = "place_verification.json";
  rep.payload["converged"] = pr.converged;
  ctx.emit(rep, "place_report.json");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-bubble blow-up toolkit for slightly supercritical gKdV"};
  app.require_subcommand(1);

  RunContext ctx;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", ctx.out_dir, "output directory for reports and csv");
    cmd->add_option("--config", ctx.config_path, "key=value config file");
    cmd->add_option("--seed", ctx.seed, "seed echoed into the report");
  };

  double gs_p = 5.0;
  bool gs_check = false;
  CLI::App* gs_cmd = app.add_subcommand("groundstate", "closed-form ground state");
  gs_cmd->add_option("--p", gs_p, "nonlinearity power");
  gs_cmd->add_flag("--check-identities", gs_check, "report operator identity residuals");
  add_common(gs_cmd);
  gs_cmd->callback([&] { run_groundstate(ctx, gs_p, gs_check); });

  double pr_p = 5.1, pr_b = 0.0, pr_bc = 0.0;
  bool pr_find = false, pr_loc = false;
  CLI::App* pr_cmd = app.add_subcommand("profile", "self-similar blow-up profile");
  pr_cmd->add_option("--p", pr_p, "nonlinearity power");
  pr_cmd->add_option("--b", pr_b, "drift parameter");
  pr_cmd->add_option("--bc", pr_bc, "cutoff eigenvalue for --localize");
  pr_cmd->add_flag("--find-bc", pr_find, "solve for the eigenvalue b_c(p)");
  pr_cmd->add_flag("--localize", pr_loc, "emit the cutoff profile and its detuning");
  add_common(pr_cmd);
  pr_cmd->callback([&] { run_profile(ctx, pr_p, pr_b, pr_find, pr_loc, pr_bc); });

  CLI::App* ev_cmd = app.add_subcommand("evolve", "periodic pseudospectral evolution");
  add_common(ev_cmd);
  ev_cmd->callback([&] { run_evolve(ctx); });

  CLI::App* de_cmd = app.add_subcommand("decompose", "bubble decomposition round-trip");
  add_common(de_cmd);
  de_cmd->callback([&] { run_decompose(ctx); });

  int sy_k = 2;
  std::string sy_runner = "reduced", sy_b;
  CLI::App* sy_cmd = app.add_subcommand("sync", "synchronize bubble scales");
  sy_cmd->add_option("--k", sy_k, "bubble count");
  sy_cmd->add_option("--runner", sy_runner, "reduced or pde");
  sy_cmd->add_option("--b", sy_b, "comma-separated drift values")->required();
  add_common(sy_cmd);
  sy_cmd->callback([&] { run_sync(ctx, sy_k, sy_runner, sy_b); });

  std::string pl_targets, pl_runner = "reduced";
  double pl_threshold = 0.0;
  CLI::App* pl_cmd = app.add_subcommand("place", "hit a prescribed blow-up set");
  pl_cmd->add_option("--targets", pl_targets, "comma-separated blow-up positions")
      ->required();
  pl_cmd->add_option("--runner", pl_runner, "reduced (pde runs via the library)");
  pl_cmd->add_option("--threshold", pl_threshold, "separation threshold (default 8/bc)");
  add_common(pl_cmd);
  pl_cmd->callback([&] { run_place(ctx, pl_targets, pl_runner, pl_threshold); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const usage_error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const domain_error& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
