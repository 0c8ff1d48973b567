#include "mfl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "mfl/chaos.hpp"
#include "mfl/config.hpp"
#include "mfl/transport.hpp"
#include "mfl/transport_oracle.hpp"
#include "mfl/workers.hpp"

namespace mfl::cli {

using nlohmann::json;

namespace {

void atomic_write(const std::string& path,
                  const std::function<void(std::ostream&)>& body) {
  const std::filesystem::path target(path);
  const std::filesystem::path tmp(path + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os)
      throw ConfigError("cannot open output file for writing",
                        {{"path", tmp.string()}});
    body(os);
    os.flush();
    if (!os)
      throw ConfigError("write failed", {{"path", tmp.string()}});
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec)
    throw ConfigError("cannot move output into place: " + ec.message(),
                      {{"path", path}});
}

int emit_error(std::ostream& err, const Error& e) {
  json d = json::object();
  for (const auto& [k, v] : e.details()) d[k] = v;
  err << json{{"error", e.what()},
              {"exit_code", e.exit_code()},
              {"details", d}}
             .dump()
      << '\n';
  return e.exit_code();
}

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

void add_common(CLI::App* sub, CommonOpts& o, bool with_threads = true) {
  sub->add_option("--config", o.config_path, "experiment config JSON file")
      ->required();
  sub->add_option("--seed", o.seed, "override the config seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
  if (with_threads)
    sub->add_option("--threads", o.threads,
                    "worker threads (0 = logical cores; env "
                    "MEANFIELD_LAB_THREADS wins)");
}

ExperimentConfig load(const CommonOpts& o) {
  ExperimentConfig cfg = load_config_file(o.config_path);
  if (o.seed_set) cfg.sim.seed = o.seed;
  return cfg;
}

// --- simulate -----------------------------------------------------------------

int do_simulate(const CommonOpts& o, const std::string& out_path,
                std::ostream& out) {
  ExperimentConfig cfg = load(o);
  Workers workers(Workers::resolve_count(o.threads));
  const Ensemble init = make_initial_ensemble(cfg.space, cfg.init, cfg.sim.d,
                                              cfg.sim.n, cfg.sim.seed);
  const TrajectoryBundle bundle =
      solve_n_particle(cfg.space, cfg.fields, init, cfg.sim, &workers);
  if (!out_path.empty())
    atomic_write(out_path, [&](std::ostream& os) { write_csv(bundle, os); });
  json rep{{"command", "simulate"},
           {"seed", cfg.sim.seed},
           {"N", cfg.sim.n},
           {"K", cfg.sim.k},
           {"T", cfg.sim.t_final},
           {"d", cfg.sim.d},
           {"M", cfg.space.size()},
           {"threads", workers.count()},
           {"sup_moment_p2", sup_moment(cfg.space, bundle, 2, &workers)}};
  if (!out_path.empty()) rep["out"] = out_path;
  out << rep.dump() << '\n';
  return 0;
}

// --- meanfield ------------------------------------------------------------------

json report_json(const FixedPointReport& r) {
  return json{{"iterations", r.iterations},
              {"converged", r.converged},
              {"tol", r.tol},
              {"gaps", r.gaps}};
}

int do_meanfield(const CommonOpts& o, const std::string& out_law,
                 const std::string& out_report, std::optional<double> tol,
                 std::optional<std::size_t> max_iter, std::ostream& out) {
  ExperimentConfig cfg = load(o);
  Workers workers(Workers::resolve_count(o.threads));
  if (tol) cfg.meanfield.tol = *tol;
  if (max_iter) cfg.meanfield.max_iter = *max_iter;
  if (std::isnan(cfg.meanfield.tol) || cfg.meanfield.tol < 0.0)
    throw ConfigError("meanfield: tol must be a nonnegative number");
  if (cfg.meanfield.max_iter == 0)
    throw ConfigError("meanfield: max_iter must be positive");
  SimConfig law_cfg = cfg.sim;
  law_cfg.n = cfg.meanfield.m_law;
  const Ensemble init = make_initial_ensemble(cfg.space, cfg.init, cfg.sim.d,
                                              law_cfg.n, law_cfg.seed);
  auto [law, rep] =
      fixed_point(cfg.space, cfg.fields, init, law_cfg, cfg.meanfield.tol,
                  cfg.meanfield.max_iter, &workers);
  json jrep = report_json(rep);
  jrep["command"] = "meanfield";
  jrep["seed"] = law_cfg.seed;
  jrep["M"] = law_cfg.n;
  if (!out_law.empty()) {
    atomic_write(out_law, [&](std::ostream& os) { write_csv(law, os); });
    jrep["out_law"] = out_law;
  }
  if (!out_report.empty())
    atomic_write(out_report,
                 [&](std::ostream& os) { os << jrep.dump(2) << '\n'; });
  // A non-converged iteration is an honest result, not a failure.
  out << jrep.dump() << '\n';
  return 0;
}

// --- chaos ----------------------------------------------------------------------

int do_chaos(const CommonOpts& o, const std::string& out_csv,
             const std::string& out_summary,
             const std::vector<std::size_t>& n_grid_flag,
             std::optional<std::size_t> reps_flag, std::ostream& out) {
  ExperimentConfig cfg = load(o);
  Workers workers(Workers::resolve_count(o.threads));
  if (!n_grid_flag.empty()) cfg.chaos.n_grid = n_grid_flag;
  if (reps_flag) cfg.chaos.reps = *reps_flag;
  if (cfg.chaos.n_grid.empty() || cfg.chaos.reps == 0)
    throw ConfigError("chaos: need a nonempty N grid and reps >= 1");
  const std::size_t max_n =
      *std::max_element(cfg.chaos.n_grid.begin(), cfg.chaos.n_grid.end());
  const std::size_t m_law =
      cfg.chaos.m_law ? cfg.chaos.m_law : 4 * max_n;

  SimConfig law_cfg = cfg.sim;
  law_cfg.n = m_law;
  law_cfg.seed = derive_seed(cfg.sim.seed, 0xA11CE);
  const Ensemble law_init = make_initial_ensemble(
      cfg.space, cfg.init, cfg.sim.d, m_law, law_cfg.seed);
  auto [law, law_rep] =
      fixed_point(cfg.space, cfg.fields, law_init, law_cfg, cfg.meanfield.tol,
                  cfg.meanfield.max_iter, &workers);

  const auto make_init = [&](std::size_t n, std::uint64_t seed) {
    return make_initial_ensemble(cfg.space, cfg.init, cfg.sim.d, n, seed);
  };
  const ChaosSummary sum =
      chaos_sweep(cfg.space, cfg.fields, law, cfg.sim, cfg.chaos.n_grid,
                  cfg.chaos.reps, make_init, &workers);

  json groups = json::array();
  for (const ChaosGroup& g : sum.groups)
    groups.push_back(json{{"N", g.n},
                          {"mean_err", g.mean_err},
                          {"stderr_err", g.stderr_err},
                          {"reps_ok", g.reps_ok}});
  json jrep{{"command", "chaos"},
            {"seed", cfg.sim.seed},
            {"law_seed", law_cfg.seed},
            {"law_paths", m_law},
            {"law_converged", law_rep.converged},
            {"law_iterations", law_rep.iterations},
            {"n_grid", cfg.chaos.n_grid},
            {"reps", cfg.chaos.reps},
            {"groups", groups},
            {"slope", sum.slope ? json(*sum.slope) : json()},
            {"intercept", sum.intercept ? json(*sum.intercept) : json()}};
  if (!out_csv.empty()) {
    atomic_write(out_csv,
                 [&](std::ostream& os) { write_sweep_csv(sum, os); });
    jrep["out"] = out_csv;
  }
  if (!out_summary.empty())
    atomic_write(out_summary,
                 [&](std::ostream& os) { os << jrep.dump(2) << '\n'; });
  out << jrep.dump() << '\n';
  return 0;
}

// --- validate -------------------------------------------------------------------

int do_validate(const CommonOpts& o, std::optional<std::size_t> samples,
                std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = load(o);
  ProbeOptions opt;
  opt.samples = samples ? *samples : cfg.validate.samples;
  opt.seed = cfg.sim.seed;
  opt.d = cfg.sim.d;
  opt.m_noise = cfg.sim.m_noise;
  const GeometryReport geo = validate_geometry(cfg.space, cfg.fields, opt);
  ProbeOptions lop = opt;
  lop.samples = cfg.validate.pairs;
  const LipschitzEstimate lip = estimate_lipschitz(cfg.space, cfg.fields, lop);

  json jlip{{"v", lip.v},
            {"sigma", lip.sigma},
            {"flux", lip.flux},
            {"pairs_used", lip.pairs_used}};
  const LipschitzDeclaration& decl = cfg.fields.declared_lipschitz();
  json exceeded = json::array();
  json jdecl;
  if (decl.v || decl.sigma || decl.flux) {
    jdecl = json::object();
    if (decl.v) {
      jdecl["v"] = *decl.v;
      if (lip.v > *decl.v) exceeded.push_back("v");
    }
    if (decl.sigma) {
      jdecl["sigma"] = *decl.sigma;
      if (lip.sigma > *decl.sigma) exceeded.push_back("sigma");
    }
    if (decl.flux) {
      jdecl["flux"] = *decl.flux;
      if (lip.flux > *decl.flux) exceeded.push_back("flux");
    }
  }
  json jrep{{"command", "validate"},
            {"seed", opt.seed},
            {"field", cfg.fields.field().name()},
            {"passed", geo.passed},
            {"worst_margin", geo.worst_margin},
            {"worst_mass_dev", geo.worst_mass_dev},
            {"samples", geo.samples},
            {"lipschitz", jlip},
            {"declared", jdecl},
            {"declared_exceeded", exceeded}};
  if (!geo.passed) {
    jrep["counterexample"] = json{{"x", geo.x},
                                  {"lambda", geo.lambda},
                                  {"g", geo.g},
                                  {"entry", geo.entry},
                                  {"probe_kind", geo.probe_kind}};
  } else {
    jrep["counterexample"] = json();
  }
  out << jrep.dump() << '\n';
  if (!geo.passed) {
    err << json{{"error", "geometric condition violated"},
                {"exit_code", 4},
                {"details",
                 {{"worst_margin", format_double(geo.worst_margin)},
                  {"probe_kind", geo.probe_kind},
                  {"entry", std::to_string(geo.entry)}}}}
               .dump()
        << '\n';
    return 4;
  }
  return 0;
}

// --- oracle-check ----------------------------------------------------------------

struct OracleFailure {
  std::string family;
  std::size_t instance = 0;
  double got = 0.0, want = 0.0;
  json dump;
};

struct OracleState {
  CounterRng rng;
  std::vector<OracleFailure> failures;
  double max_diff = 0.0;
  std::size_t checks = 0;

  explicit OracleState(std::uint64_t seed)
      : rng(seed, Stream::kReference) {}

  void compare(const std::string& family, std::size_t inst, double got,
               double want, const json& dump) {
    ++checks;
    const double diff = std::abs(got - want);
    max_diff = std::max(max_diff, diff);
    if (diff > kOracleTol * std::max(1.0, std::abs(want)))
      failures.push_back({family, inst, got, want, dump});
  }
};

double u01(const CounterRng& rng, std::uint32_t inst, std::uint32_t cell) {
  double u;
  rng.uniforms(inst, cell, {&u, 1});
  return u;
}

// Random finite metric on m points: a star metric d_ij = a_i + a_j, a line
// metric from sorted positions, or a uniform two-point-distance metric.
StrategySpace random_space(const CounterRng& rng, std::uint32_t inst,
                           std::size_t m) {
  std::vector<std::string> labels(m);
  for (std::size_t i = 0; i < m; ++i) labels[i] = "u" + std::to_string(i + 1);
  std::vector<std::vector<double>> dist(m, std::vector<double>(m, 0.0));
  const double pick = u01(rng, inst, 100);
  std::vector<double> a(m);
  rng.uniforms(inst, 101, a);
  if (pick < 1.0 / 3) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (i != j) dist[i][j] = (0.1 + a[i]) + (0.1 + a[j]);
  } else if (pick < 2.0 / 3) {
    std::vector<double> p(a);
    for (double& v : p) v *= 3.0;
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i + 1 < m; ++i)
      p[i + 1] = std::max(p[i + 1], p[i] + 1e-3);  // distinctness
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (i != j) dist[i][j] = std::abs(p[i] - p[j]);
  } else {
    const double c = 0.5 + 2.0 * a[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (i != j) dist[i][j] = c;
  }
  return StrategySpace(std::move(labels), std::move(dist));
}

std::vector<double> flat_dist(const StrategySpace& space) {
  const std::size_t m = space.size();
  std::vector<double> d(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) d[i * m + j] = space.dist(i, j);
  return d;
}

// Cells must differ per instance t or every instance would reuse the same
// ensembles; salts 10000/20000 keep the two sides disjoint for t < 2500.
Ensemble random_ensemble(const CounterRng& rng, const StrategySpace& space,
                         std::uint32_t t, std::uint32_t salt, std::size_t n,
                         std::size_t d) {
  Ensemble e(d, space.size(), n);
  for (std::size_t i = 0; i < n; ++i) {
    rng.normals(static_cast<std::uint32_t>(i), salt + 2u * t, e.x_row(i));
    sample_simplex(rng, static_cast<std::uint32_t>(i), salt + 2u * t + 1u,
                   e.lam_row(i));
  }
  return e;
}

int do_oracle_check(std::size_t instances, std::uint64_t seed,
                    std::size_t max_bf, std::size_t max_hung,
                    bool inject_fault, std::ostream& out, std::ostream& err) {
  if (max_bf < 1 || max_bf > 8)
    throw ConfigError("oracle-check: --max-bruteforce must be in [1, 8]");
  if (max_hung < 1 || max_hung > 256)
    throw ConfigError("oracle-check: --max-hungarian must be in [1, 256]");
  if (instances == 0 || instances > 2000)
    throw ConfigError("oracle-check: --instances must be in [1, 2000]");
  OracleState st(seed);
  // Size ranges honor the caps even at cap 1 (degenerate instances are legal).
  const std::size_t bf_lo = std::min<std::size_t>(2, max_bf);
  const std::size_t hung_lo = std::min<std::size_t>(2, max_hung);
  const std::size_t wp_hi = std::min<std::size_t>(16, max_hung);

  // Family A: W1 between mixed strategies vs transport bruteforce.
  for (std::size_t t = 0; t < instances; ++t) {
    const auto inst = static_cast<std::uint32_t>(t);
    const std::size_t m =
        bf_lo + static_cast<std::size_t>(u01(st.rng, inst, 0) *
                                         static_cast<double>(max_bf - bf_lo + 1));
    const StrategySpace space = random_space(st.rng, inst, m);
    std::vector<double> aw(m), bw(m);
    sample_simplex(st.rng, inst, 1, aw);
    sample_simplex(st.rng, inst, 2, bw);
    const MixedStrategy a(aw), b(bw);
    const double got = w1_strategy(space, a, b);
    const std::vector<double> dist = flat_dist(space);
    const double want =
        transport_lp_bruteforce(CostMatrix{m, m, dist}, aw, bw);
    st.compare("w1_vs_bruteforce", t, got, want,
               json{{"M", m}, {"a", aw}, {"b", bw}, {"dist", dist}});
  }

  // Family B: production transport LP vs exhaustive vertex enumeration on
  // random costs. Continuous marginals are almost surely nondegenerate, which
  // keeps the enumerated basis count small; the returned plan is audited for
  // feasibility and cost consistency as well.
  for (std::size_t t = 0; t < instances; ++t) {
    const auto inst = static_cast<std::uint32_t>(1000000 + t);
    const std::size_t na =
        1 + static_cast<std::size_t>(u01(st.rng, inst, 0) *
                                     static_cast<double>(max_bf));
    const std::size_t nb =
        1 + static_cast<std::size_t>(u01(st.rng, inst, 1) *
                                     static_cast<double>(max_bf));
    std::vector<double> cost(na * nb);
    for (std::size_t i = 0; i < na; ++i)
      st.rng.uniforms(static_cast<std::uint32_t>(i), inst,
                      {cost.data() + i * nb, nb});
    std::vector<double> ma(na), mb(nb);
    sample_simplex(st.rng, inst, 2, ma);
    sample_simplex(st.rng, inst, 3, mb);
    const TransportResult res = transport_min_cost(na, nb, cost, ma, mb, true);
    const double want =
        transport_lp_bruteforce(CostMatrix{na, nb, cost}, ma, mb);
    const json dump{
        {"na", na}, {"nb", nb}, {"cost", cost}, {"a", ma}, {"b", mb}};
    st.compare("transport_vs_bruteforce", t, res.value, want, dump);
    double plan_cost = 0.0, dev = 0.0;
    std::vector<double> rs(na, 0.0), cs(nb, 0.0);
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = 0; j < nb; ++j) {
        const double f = res.plan[i * nb + j];
        plan_cost += f * cost[i * nb + j];
        rs[i] += f;
        cs[j] += f;
        dev = std::max(dev, -f);
      }
    for (std::size_t i = 0; i < na; ++i)
      dev = std::max(dev, std::abs(rs[i] - ma[i]));
    for (std::size_t j = 0; j < nb; ++j)
      dev = std::max(dev, std::abs(cs[j] - mb[j]));
    st.compare("transport_plan_cost", t, plan_cost, res.value, dump);
    st.compare("transport_plan_marginals", t, dev, 0.0, dump);
  }

  // Family C: equal-size uniform transport vs Hungarian assignment.
  for (std::size_t t = 0; t < instances; ++t) {
    const auto inst = static_cast<std::uint32_t>(2000000 + t);
    const std::size_t n = hung_lo + static_cast<std::size_t>(
                                        u01(st.rng, inst, 0) *
                                        static_cast<double>(max_hung - hung_lo + 1));
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
      st.rng.uniforms(static_cast<std::uint32_t>(i), inst,
                      {cost.data() + i * n, n});
    const std::vector<double> u(n, 1.0 / static_cast<double>(n));
    double got = transport_min_cost(n, n, cost, u, u, false).value;
    if (inject_fault && t == 0) got += 1e-3;  // negative control
    const double want =
        hungarian(CostMatrix{n, n, cost}).value / static_cast<double>(n);
    st.compare("transport_vs_hungarian", t, got, want, json{{"n", n}});
  }

  // Family D: M = 2 closed forms for BL and W1.
  for (std::size_t t = 0; t < instances; ++t) {
    const auto inst = static_cast<std::uint32_t>(3000000 + t);
    const double d12 = 0.1 + 2.9 * u01(st.rng, inst, 0);
    const StrategySpace space({"u1", "u2"}, {{0.0, d12}, {d12, 0.0}});
    const double mass = 2.0 * u01(st.rng, inst, 1) - 1.0;
    const std::vector<double> mu{mass, -mass};
    const double got_bl = bl_norm(space, mu);
    const double closed = 2.0 * std::abs(mass) * d12 / (2.0 + d12);
    st.compare("bl_closed_form", t, got_bl, closed,
               json{{"d12", d12}, {"mass", mass}});
    st.compare("bl_vs_lp", t, got_bl, detail::bl_norm_lp(space, mu),
               json{{"d12", d12}, {"mass", mass}});
    std::vector<double> aw(2), bw(2);
    sample_simplex(st.rng, inst, 2, aw);
    sample_simplex(st.rng, inst, 3, bw);
    st.compare("w1_closed_form", t,
               w1_strategy(space, MixedStrategy(aw), MixedStrategy(bw)),
               std::abs(aw[0] - bw[0]) * d12, json{{"d12", d12}});
  }

  // Family E: product-norm Wasserstein between equal-size ensembles vs
  // Hungarian assignment on the same pairwise costs. Uniform equal marginals
  // admit an assignment optimum, so hungarian / n is exact.
  for (std::size_t t = 0; t < instances; ++t) {
    const auto inst = static_cast<std::uint32_t>(4000000 + t);
    const std::size_t n = hung_lo + static_cast<std::size_t>(
                                        u01(st.rng, inst, 0) *
                                        static_cast<double>(wp_hi - hung_lo + 1));
    const std::size_t d =
        1 + static_cast<std::size_t>(u01(st.rng, inst, 1) * 3.0);
    const std::size_t m =
        2 + static_cast<std::size_t>(u01(st.rng, inst, 2) * 3.0);
    const int p = u01(st.rng, inst, 3) < 0.5 ? 1 : 2;
    const StrategySpace space = random_space(st.rng, inst, m);
    const auto tt = static_cast<std::uint32_t>(t);
    const Ensemble ea = random_ensemble(st.rng, space, tt, 10000, n, d);
    const Ensemble eb = random_ensemble(st.rng, space, tt, 20000, n, d);
    const double got = w_product(space, p, ea, eb);
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double s = state_norm(space, ea.state(i), eb.state(j));
        cost[i * n + j] = p == 1 ? s : s * s;
      }
    const double lp =
        hungarian(CostMatrix{n, n, cost}).value / static_cast<double>(n);
    const double want = p == 1 ? lp : std::sqrt(std::max(0.0, lp));
    st.compare("w_product_vs_hungarian", t, got, want,
               json{{"n", n}, {"d", d}, {"M", m}, {"p", p}});
  }

  json rep{{"command", "oracle-check"},
           {"seed", seed},
           {"instances", instances},
           {"checks", st.checks},
           {"max_abs_diff", st.max_diff},
           {"fault_injected", inject_fault},
           {"passed", st.failures.empty()}};
  out << rep.dump() << '\n';
  if (!st.failures.empty()) {
    const OracleFailure& w = *std::max_element(
        st.failures.begin(), st.failures.end(),
        [](const OracleFailure& x, const OracleFailure& y) {
          return std::abs(x.got - x.want) < std::abs(y.got - y.want);
        });
    err << json{{"error", "oracle mismatch"},
                {"exit_code", 4},
                {"details",
                 {{"family", w.family},
                  {"instance", std::to_string(w.instance)},
                  {"got", format_double(w.got)},
                  {"want", format_double(w.want)},
                  {"instance_dump", w.dump.dump()}}}}
               .dump()
        << '\n';
    return 4;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"meanfield_lab: interacting-particle and mean-field "
               "experiments on position x strategy states"};
  app.name("meanfield_lab");
  app.require_subcommand(1);

  CommonOpts sim_o;
  std::string sim_out;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "solve the N-particle system and export trajectories");
  add_common(c_sim, sim_o);
  c_sim->add_option("--out", sim_out, "trajectory CSV path");

  CommonOpts mf_o;
  std::string mf_out_law, mf_out_report;
  std::optional<double> mf_tol;
  std::optional<std::size_t> mf_max_iter;
  CLI::App* c_mf = app.add_subcommand(
      "meanfield", "law fixed-point iteration (frozen-noise Picard)");
  add_common(c_mf, mf_o);
  c_mf->add_option("--out-law", mf_out_law, "law sample-path CSV");
  c_mf->add_option("--out-report", mf_out_report, "iteration report JSON");
  c_mf->add_option("--tol", mf_tol, "path-space W2 stopping tolerance");
  c_mf->add_option("--max-iter", mf_max_iter, "iteration cap");

  CommonOpts ch_o;
  std::string ch_out, ch_out_summary;
  std::vector<std::size_t> ch_grid;
  std::optional<std::size_t> ch_reps;
  CLI::App* c_ch = app.add_subcommand(
      "chaos", "synchronous-coupling sweep over ensemble sizes");
  add_common(c_ch, ch_o);
  c_ch->add_option("--out", ch_out, "sweep CSV (N,rep,err,wall_ms)");
  c_ch->add_option("--out-summary", ch_out_summary, "summary JSON");
  c_ch->add_option("--n-grid", ch_grid, "ensemble sizes, e.g. 8,16,32")
      ->delimiter(',');
  c_ch->add_option("--reps", ch_reps, "repetitions per N");

  CommonOpts va_o;
  std::optional<std::size_t> va_samples;
  CLI::App* c_va = app.add_subcommand(
      "validate", "geometric-condition probe and Lipschitz estimate");
  add_common(c_va, va_o, false);
  c_va->add_option("--samples", va_samples, "geometry probe count");

  std::size_t or_instances = 50;
  std::uint64_t or_seed = 1;
  std::size_t or_max_bf = 6, or_max_hung = 64;
  bool or_fault = false;
  CLI::App* c_or = app.add_subcommand(
      "oracle-check", "cross-check the transport LP against both oracles");
  c_or->add_option("--instances", or_instances, "instances per family");
  c_or->add_option("--seed", or_seed, "RNG seed");
  c_or->add_option("--max-bruteforce", or_max_bf,
                   "largest bruteforce support (2-8)");
  c_or->add_option("--max-hungarian", or_max_hung,
                   "largest assignment size (2-256)");
  c_or->add_flag("--inject-fault", or_fault,
                 "negative control: perturb one result, must exit 4");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_sim->parsed()) return do_simulate(sim_o, sim_out, out);
    if (c_mf->parsed())
      return do_meanfield(mf_o, mf_out_law, mf_out_report, mf_tol, mf_max_iter,
                          out);
    if (c_ch->parsed())
      return do_chaos(ch_o, ch_out, ch_out_summary, ch_grid, ch_reps, out);
    if (c_va->parsed()) return do_validate(va_o, va_samples, out, err);
    if (c_or->parsed())
      return do_oracle_check(or_instances, or_seed, or_max_bf, or_max_hung,
                             or_fault, out, err);
    throw ConfigError("no subcommand selected");
  } catch (const Error& e) {
    return emit_error(err, e);
  } catch (const std::exception& e) {
    err << json{{"error", e.what()}, {"exit_code", 1}}.dump() << '\n';
    return 1;
  }
}

}  // namespace mfl::cli
