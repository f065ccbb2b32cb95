#include "nlrec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace nlrec {

using nlohmann::json;

const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::Rtr2: return "rtr2";
    case SolverKind::Altmin1: return "altmin1";
    case SolverKind::Altmin2: return "altmin2";
    case SolverKind::Simple: return "simple";
  }
  return "?";
}

SolverKind parse_solver(const std::string& name) {
  if (name == "rtr2") return SolverKind::Rtr2;
  if (name == "altmin1") return SolverKind::Altmin1;
  if (name == "altmin2") return SolverKind::Altmin2;
  if (name == "simple") return SolverKind::Simple;
  throw ConfigError("solver: unknown solver '" + name + "' (rtr2|altmin1|altmin2|simple)");
}

Eigen::Index ExperimentConfig::columns() const {
  return data == Data::Uos ? static_cast<Eigen::Index>(uos.k) * uos.pts_per
                           : static_cast<Eigen::Index>(clusters.k) * clusters.pts_per;
}

void ExperimentConfig::validate() const {
  try {
    if (data == Data::Uos) uos.validate(); else clusters.validate();
    lifting.validate();
    rtr.validate();
    altmin.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (trials < 1) throw ConfigError("trials: must be >= 1");
  if (jobs < 1) throw ConfigError("jobs: must be >= 1");
  if (sensing == Sensing::Mask && !(delta > 0.0 && delta <= 1.0)) {
    throw ConfigError("sensing.delta: must lie in (0, 1]");
  }
  if (sensing == Sensing::Dense && m < 1 && !(delta > 0.0)) {
    throw ConfigError("sensing: dense sensing needs m or delta");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("sensing.noise_sigma: must be >= 0");
  if (noise_sigma > 0.0 && sensing != Sensing::Dense) {
    throw ConfigError("sensing.noise_sigma: noise is only supported with dense sensing");
  }
  if (rank && *rank < 1) throw ConfigError("rank: must be >= 1");
  if (!(lambda.lambda0 > 0.0) || !(lambda.factor > 1.0) || lambda.steps < 1 ||
      !(lambda.plateau_factor >= 1.0)) {
    throw ConfigError("lambda: need lambda0 > 0, factor > 1, steps >= 1, plateau_factor >= 1");
  }
  for (double d : deltas) {
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError("grid.deltas: values must lie in (0, 1]");
  }
  static const std::set<std::string> params{"", "pts_per", "k", "dim", "n"};
  if (!params.count(sweep_param)) throw ConfigError("grid.param: unknown parameter '" + sweep_param + "'");
}

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }
  bool has(const char* key) const { return j_.contains(key); }
  const json& sub(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path(it.key().c_str()) + ": unknown field");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void parse_rtr(const json& j, RtrConfig& c, const std::string& where) {
  Fields f(j, where);
  f.get("delta0", c.delta0);
  f.get("delta_bar", c.delta_bar);
  f.get("rho_prime", c.rho_prime);
  f.get("eps_g", c.eps_g);
  if (f.has("eps_h")) {
    const json& v = f.sub("eps_h");
    if (v.is_null()) c.eps_h = std::numeric_limits<double>::infinity();
    else if (v.is_number()) c.eps_h = v.get<double>();
    else throw ConfigError(f.path("eps_h") + ": expected a number or null");
  }
  f.get("max_iter", c.max_iter);
  f.get("second_order", c.second_order);
  if (f.has("tcg")) {
    Fields t(f.sub("tcg"), f.path("tcg"));
    t.get("max_inner", c.tcg.max_inner);
    t.get("kappa", c.tcg.kappa);
    t.get("theta", c.tcg.theta);
    t.finish();
  }
  f.finish();
}

void parse_altmin(const json& j, AltminConfig& c, const std::string& where) {
  Fields f(j, where);
  f.get("eps_x", c.eps_x);
  f.get("eps_u", c.eps_u);
  if (f.has("schedule")) {
    std::string s;
    f.get("schedule", s);
    if (s == "greedy") c.schedule = AltminConfig::Schedule::Greedy;
    else if (s == "adaptive") c.schedule = AltminConfig::Schedule::Adaptive;
    else throw ConfigError(f.path("schedule") + ": expected 'greedy' or 'adaptive'");
  }
  f.get("theta", c.theta);
  f.get("max_outer", c.max_outer);
  f.get("max_inner", c.max_inner);
  f.get("seed", c.seed);
  if (f.has("armijo")) {
    Fields a(f.sub("armijo"), f.path("armijo"));
    a.get("alpha0", c.armijo.alpha0);
    a.get("tau", c.armijo.tau);
    a.get("beta", c.armijo.beta);
    a.get("max_backtracks", c.armijo.max_backtracks);
    a.finish();
  }
  if (f.has("svd")) {
    Fields s(f.sub("svd"), f.path("svd"));
    s.get("tau1", c.svd.tau1);
    s.get("tau2", c.svd.tau2);
    s.get("oversample", c.svd.oversample);
    s.get("power_q", c.svd.power_q);
    s.get("exact_only", c.svd.exact_only);
    s.finish();
  }
  if (f.has("inner_rtr")) parse_rtr(f.sub("inner_rtr"), c.inner_rtr, f.path("inner_rtr"));
  f.finish();
}

json rtr_json(const RtrConfig& c) {
  json j{{"delta0", c.delta0},   {"delta_bar", c.delta_bar}, {"rho_prime", c.rho_prime},
         {"eps_g", c.eps_g},     {"max_iter", c.max_iter},   {"second_order", c.second_order},
         {"tcg", {{"max_inner", c.tcg.max_inner}, {"kappa", c.tcg.kappa}, {"theta", c.tcg.theta}}}};
  j["eps_h"] = std::isfinite(c.eps_h) ? json(c.eps_h) : json(nullptr);
  return j;
}

json altmin_json(const AltminConfig& c) {
  return json{
      {"eps_x", c.eps_x},
      {"eps_u", c.eps_u},
      {"schedule", c.schedule == AltminConfig::Schedule::Greedy ? "greedy" : "adaptive"},
      {"theta", c.theta},
      {"max_outer", c.max_outer},
      {"max_inner", c.max_inner},
      {"seed", c.seed},
      {"armijo", {{"alpha0", c.armijo.alpha0}, {"tau", c.armijo.tau}, {"beta", c.armijo.beta},
                  {"max_backtracks", c.armijo.max_backtracks}}},
      {"svd", {{"tau1", c.svd.tau1}, {"tau2", c.svd.tau2}, {"oversample", c.svd.oversample},
               {"power_q", c.svd.power_q}, {"exact_only", c.svd.exact_only}}},
      {"inner_rtr", rtr_json(c.inner_rtr)}};
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Fields top(j, "");
  bool lifting_given = false;

  if (top.has("data")) {
    Fields d(top.sub("data"), "data");
    std::string kind = "uos";
    d.get("kind", kind);
    if (kind == "uos") {
      c.data = ExperimentConfig::Data::Uos;
      d.get("n", c.uos.n);
      d.get("k", c.uos.k);
      d.get("pts_per", c.uos.pts_per);
      d.get("affine", c.uos.affine);
      if (d.has("dims")) {
        d.get("dims", c.uos.dims);
      } else {
        int dim = c.uos.dims.empty() ? 2 : c.uos.dims.front();
        d.get("dim", dim);
        c.uos.dims.assign(static_cast<std::size_t>(std::max(c.uos.k, 0)), dim);
      }
    } else if (kind == "clusters") {
      c.data = ExperimentConfig::Data::Clusters;
      d.get("n", c.clusters.n);
      d.get("k", c.clusters.k);
      d.get("pts_per", c.clusters.pts_per);
      d.get("sigma_c", c.clusters.sigma_c);
      d.get("center_sigma", c.clusters.center_sigma);
    } else {
      throw ConfigError("data.kind: expected 'uos' or 'clusters'");
    }
    d.finish();
  }

  if (top.has("sensing")) {
    Fields s(top.sub("sensing"), "sensing");
    std::string kind = "mask";
    s.get("kind", kind);
    if (kind == "mask") c.sensing = ExperimentConfig::Sensing::Mask;
    else if (kind == "dense") c.sensing = ExperimentConfig::Sensing::Dense;
    else throw ConfigError("sensing.kind: expected 'mask' or 'dense'");
    s.get("delta", c.delta);
    s.get("m", c.m);
    s.get("noise_sigma", c.noise_sigma);
    s.finish();
  }

  if (top.has("lifting")) {
    lifting_given = true;
    Fields l(top.sub("lifting"), "lifting");
    std::string kind;
    l.get("kind", kind);
    if (kind == "monomial_kernel") {
      MonomialKernel mk;
      l.get("degree", mk.degree);
      l.get("offset", mk.offset);
      c.lifting.kind = mk;
    } else if (kind == "monomial_features") {
      MonomialFeatures mf;
      l.get("degree", mf.degree);
      c.lifting.kind = mf;
    } else if (kind == "gaussian") {
      GaussianKernel g;
      l.get("sigma", g.sigma);
      c.lifting.kind = g;
    } else {
      throw ConfigError("lifting.kind: expected 'monomial_kernel', 'monomial_features' or 'gaussian'");
    }
    l.finish();
  }
  if (!lifting_given) {
    // Algebraic structure gets the monomial kernel, clusters the Gaussian one.
    if (c.data == ExperimentConfig::Data::Uos) c.lifting.kind = MonomialKernel{2, 1.0};
    else c.lifting.kind = GaussianKernel{2.5};
  }
  c.lifting.n = c.ambient();
  if (std::holds_alternative<GaussianKernel>(c.lifting.kind)) c.rank_tol = 1e-4;

  if (top.has("rank")) {
    Eigen::Index r = 0;
    top.get("rank", r);
    c.rank = r;
  }
  top.get("rank_tol", c.rank_tol);
  if (top.has("solver")) {
    std::string s;
    top.get("solver", s);
    c.solver = parse_solver(s);
  }
  if (top.has("rtr")) parse_rtr(top.sub("rtr"), c.rtr, "rtr");
  if (top.has("altmin")) parse_altmin(top.sub("altmin"), c.altmin, "altmin");
  top.get("trials", c.trials);
  top.get("seed", c.seed);
  top.get("jobs", c.jobs);
  top.get("out", c.out);
  top.get("success_rmse", c.success_rmse);
  if (top.has("grid")) {
    Fields g(top.sub("grid"), "grid");
    g.get("deltas", c.deltas);
    g.get("param", c.sweep_param);
    g.get("values", c.sweep_values);
    g.finish();
  }
  if (top.has("lambda")) {
    Fields l(top.sub("lambda"), "lambda");
    l.get("lambda0", c.lambda.lambda0);
    l.get("factor", c.lambda.factor);
    l.get("steps", c.lambda.steps);
    l.get("plateau_factor", c.lambda.plateau_factor);
    l.finish();
  }
  top.get("rank_offsets", c.rank_offsets);
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  if (c.data == ExperimentConfig::Data::Uos) {
    j["data"] = {{"kind", "uos"}, {"n", c.uos.n}, {"k", c.uos.k}, {"dims", c.uos.dims},
                 {"pts_per", c.uos.pts_per}, {"affine", c.uos.affine}};
  } else {
    j["data"] = {{"kind", "clusters"}, {"n", c.clusters.n}, {"k", c.clusters.k},
                 {"pts_per", c.clusters.pts_per}, {"sigma_c", c.clusters.sigma_c},
                 {"center_sigma", c.clusters.center_sigma}};
  }
  j["sensing"] = {{"kind", c.sensing == ExperimentConfig::Sensing::Mask ? "mask" : "dense"},
                  {"delta", c.delta}, {"m", c.m}, {"noise_sigma", c.noise_sigma}};
  if (const auto* mk = std::get_if<MonomialKernel>(&c.lifting.kind)) {
    j["lifting"] = {{"kind", "monomial_kernel"}, {"degree", mk->degree}, {"offset", mk->offset}};
  } else if (const auto* mf = std::get_if<MonomialFeatures>(&c.lifting.kind)) {
    j["lifting"] = {{"kind", "monomial_features"}, {"degree", mf->degree}};
  } else {
    j["lifting"] = {{"kind", "gaussian"}, {"sigma", std::get<GaussianKernel>(c.lifting.kind).sigma}};
  }
  if (c.rank) j["rank"] = *c.rank;
  j["rank_tol"] = c.rank_tol;
  j["solver"] = to_string(c.solver);
  j["rtr"] = rtr_json(c.rtr);
  j["altmin"] = altmin_json(c.altmin);
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["out"] = c.out;
  j["success_rmse"] = c.success_rmse;
  j["grid"] = {{"deltas", c.deltas}, {"param", c.sweep_param}, {"values", c.sweep_values}};
  j["lambda"] = {{"lambda0", c.lambda.lambda0}, {"factor", c.lambda.factor},
                 {"steps", c.lambda.steps}, {"plateau_factor", c.lambda.plateau_factor}};
  j["rank_offsets"] = c.rank_offsets;
  return j;
}

std::uint64_t trial_seed(std::uint64_t base, int trial) {
  // splitmix64 finalizer so that neighbouring bases do not share trials
  std::uint64_t z = base * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(trial) + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Problem make_problem(const ExperimentConfig& cfg, std::uint64_t seed,
                     std::optional<Eigen::Index> rank_override) {
  std::mt19937_64 rng(seed);
  Matrix truth;
  std::vector<int> labels;
  if (cfg.data == ExperimentConfig::Data::Uos) {
    UosData d = gen_uos(cfg.uos, rng);
    truth = std::move(d.m);
    labels = std::move(d.labels);
  } else {
    ClusterData d = gen_clusters(cfg.clusters, rng);
    truth = std::move(d.m);
    labels = std::move(d.labels);
  }

  std::shared_ptr<const MeasurementSubspace> meas;
  Vector clean;
  if (cfg.sensing == ExperimentConfig::Sensing::Mask) {
    meas = std::make_shared<const MeasurementSubspace>(gen_entry_mask(truth, cfg.delta, rng));
    clean = meas->rhs();
  } else {
    const Eigen::Index m =
        cfg.m > 0 ? cfg.m
                  : static_cast<Eigen::Index>(std::llround(cfg.delta * static_cast<double>(truth.size())));
    std::optional<double> noise;
    if (cfg.noise_sigma > 0.0) noise = cfg.noise_sigma;
    SensingData sd = gen_gaussian_sensing(truth, m, rng, noise);
    meas = std::make_shared<const MeasurementSubspace>(std::move(sd.meas));
    clean = std::move(sd.clean);
  }

  LiftingSpec lifting = cfg.lifting;
  lifting.n = truth.rows();
  const CostForm form =
      std::holds_alternative<MonomialFeatures>(lifting.kind) ? CostForm::Feature : CostForm::KernelTrace;
  // The rank the truth exhibits under the chosen lifting.
  Matrix lifted_truth;
  if (form == CostForm::Feature) {
    lifted_truth = monomial_features(truth, std::get<MonomialFeatures>(lifting.kind).degree);
  } else if (const auto* mk = std::get_if<MonomialKernel>(&lifting.kind)) {
    lifted_truth = monomial_kernel(truth, truth, mk->degree, mk->offset);
  } else {
    lifted_truth = gaussian_kernel(truth, truth, std::get<GaussianKernel>(lifting.kind).sigma);
  }
  Eigen::Index true_rank = numerical_rank(lifted_truth, cfg.rank_tol);
  // A Gaussian kernel of clustered data is numerically full rank; its dominant
  // singular values number the clusters.
  if (std::holds_alternative<GaussianKernel>(lifting.kind) && cfg.data == ExperimentConfig::Data::Clusters) {
    true_rank = cfg.clusters.k;
  }
  const Eigen::Index r = rank_override ? *rank_override : (cfg.rank ? *cfg.rank : true_rank);

  Objective obj(lifting, r, form, meas);
  ProductPoint start = obj.initial_point(meas->feasible_point());
  return Problem{std::move(truth), std::move(labels), meas,  std::move(clean),
                 true_rank,        std::move(obj),    std::move(start)};
}

SolveResult run_solver(const ExperimentConfig& cfg, const Objective& obj, const ProductPoint& z0,
                       const Matrix* truth) {
  switch (cfg.solver) {
    case SolverKind::Rtr2: return rtr_solve(obj, z0, cfg.rtr, truth);
    case SolverKind::Altmin1: {
      AltminConfig a = cfg.altmin;
      a.inner = AltminConfig::Inner::GradientDescent;
      return altmin_solve(obj, z0, a, truth);
    }
    case SolverKind::Altmin2: {
      AltminConfig a = cfg.altmin;
      a.inner = AltminConfig::Inner::TrustRegion;
      return altmin_solve(obj, z0, a, truth);
    }
    case SolverKind::Simple: return simple_altmin_solve(obj, z0, cfg.altmin, truth);
  }
  throw ConfigError("unknown solver");
}

namespace {

// Runs body(i) for i in [0, n) on up to `jobs` threads; results are written by
// index so the outcome does not depend on scheduling.
template <class F>
void parallel_for(int n, int jobs, F&& body) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(jobs, n); ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

TrialResult finish_trial(const ExperimentConfig& cfg, const Problem& p, SolveResult&& res,
                         int index, std::uint64_t seed, double seconds) {
  TrialResult t;
  t.index = index;
  t.seed = seed;
  t.rank = p.objective.rank();
  t.rmse = rmse(res.z.x, p.truth);
  t.success = t.rmse <= cfg.success_rmse;
  t.status = res.trace.status;
  t.iterations = std::max(0, static_cast<int>(res.trace.rows.size()) - 1);
  t.final_gnorm = res.trace.final_gnorm();
  t.final_cost = p.objective.cost(res.z);
  t.seconds = seconds;
  t.trace = std::move(res.trace);
  return t;
}

TrialResult recover_trial(const ExperimentConfig& cfg, int index,
                          std::optional<Eigen::Index> rank_override = std::nullopt) {
  const std::uint64_t seed = trial_seed(cfg.seed, index);
  const auto t0 = std::chrono::steady_clock::now();
  Problem p = make_problem(cfg, seed, rank_override);
  SolveResult res = run_solver(cfg, p.objective, p.start, &p.truth);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return finish_trial(cfg, p, std::move(res), index, seed, secs);
}

TrialResult cluster_trial(const ExperimentConfig& cfg, int index) {
  const std::uint64_t seed = trial_seed(cfg.seed, index);
  const auto t0 = std::chrono::steady_clock::now();
  Problem p = make_problem(cfg, seed);
  SolveResult res = run_solver(cfg, p.objective, p.start, &p.truth);
  const Matrix x = res.z.x;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  TrialResult t = finish_trial(cfg, p, std::move(res), index, seed, secs);
  std::mt19937_64 rng(seed ^ 0x5DEECE66DULL);
  const std::vector<int> labels = cluster_assign(x, cfg.clusters.k, rng);
  t.rand_index = rand_index(labels, p.labels);
  t.success = t.rand_index == 1.0;
  return t;
}

void summarize(RecoverReport& rep) {
  double ok = 0.0;
  double err = 0.0;
  for (const auto& t : rep.trials) {
    ok += t.success ? 1.0 : 0.0;
    err += t.rmse;
  }
  const auto n = static_cast<double>(rep.trials.size());
  rep.success_fraction = n > 0 ? ok / n : 0.0;
  rep.mean_rmse = n > 0 ? err / n : 0.0;
}

void write_trace(const std::string& dir, const TrialResult& t) {
  std::ofstream os(dir + "/trace_" + std::to_string(t.index) + ".csv");
  t.trace.write_csv(os);
}

void emit_recover(const ExperimentConfig& cfg, const RecoverReport& rep, const char* command) {
  if (cfg.out.empty()) return;
  std::filesystem::create_directories(cfg.out);
  write_trials_csv(cfg.out + "/trials.csv", rep.trials);
  for (const auto& t : rep.trials) write_trace(cfg.out, t);
  write_json(cfg.out + "/summary.json",
             json{{"command", command},
                  {"config", to_json(cfg)},
                  {"trials", rep.trials.size()},
                  {"success_fraction", rep.success_fraction},
                  {"mean_rmse", rep.mean_rmse}});
}

ExperimentConfig with_param(ExperimentConfig cfg, const std::string& param, double value) {
  const int v = static_cast<int>(std::lround(value));
  const bool uos = cfg.data == ExperimentConfig::Data::Uos;
  if (param == "pts_per") {
    (uos ? cfg.uos.pts_per : cfg.clusters.pts_per) = v;
  } else if (param == "k") {
    if (uos) {
      const int dim = cfg.uos.dims.empty() ? 2 : cfg.uos.dims.front();
      cfg.uos.k = v;
      cfg.uos.dims.assign(static_cast<std::size_t>(std::max(v, 0)), dim);
    } else {
      cfg.clusters.k = v;
    }
  } else if (param == "dim") {
    if (!uos) throw ConfigError("grid.param: 'dim' applies to union-of-subspaces data only");
    cfg.uos.dims.assign(cfg.uos.dims.size(), v);
  } else if (param == "n") {
    (uos ? cfg.uos.n : cfg.clusters.n) = v;
    cfg.lifting.n = v;
  } else {
    throw ConfigError("grid.param: unknown parameter '" + param + "'");
  }
  return cfg;
}

PhaseReport grid(const ExperimentConfig& cfg, const std::string& param,
                 TrialResult (*trial)(const ExperimentConfig&, int)) {
  PhaseReport rep;
  rep.deltas = cfg.deltas;
  rep.params = cfg.sweep_values;
  rep.fraction.assign(rep.params.size(), std::vector<double>(rep.deltas.size(), 0.0));
  const int cells = static_cast<int>(rep.params.size() * rep.deltas.size());
  std::vector<double> frac(static_cast<std::size_t>(cells), 0.0);
  parallel_for(cells, cfg.jobs, [&](int c) {
    const auto pi = static_cast<std::size_t>(c) / rep.deltas.size();
    const auto di = static_cast<std::size_t>(c) % rep.deltas.size();
    ExperimentConfig cell = with_param(cfg, param, rep.params[pi]);
    cell.delta = rep.deltas[di];
    cell.validate();
    int ok = 0;
    for (int t = 0; t < cfg.trials; ++t) ok += trial(cell, t).success ? 1 : 0;
    frac[static_cast<std::size_t>(c)] = static_cast<double>(ok) / cfg.trials;
  });
  for (int c = 0; c < cells; ++c) {
    rep.fraction[static_cast<std::size_t>(c) / rep.deltas.size()]
                [static_cast<std::size_t>(c) % rep.deltas.size()] = frac[static_cast<std::size_t>(c)];
  }
  return rep;
}

TrialResult recover_trial_default(const ExperimentConfig& cfg, int index) {
  return recover_trial(cfg, index);
}

void emit_grid(const ExperimentConfig& cfg, const PhaseReport& rep, const std::string& param,
               const char* command) {
  if (cfg.out.empty()) return;
  std::filesystem::create_directories(cfg.out);
  write_heatmap_csv(cfg.out + "/heatmap.csv", rep, param);
  write_json(cfg.out + "/summary.json", json{{"command", command},
                                             {"config", to_json(cfg)},
                                             {"deltas", rep.deltas},
                                             {"params", rep.params},
                                             {"fraction", rep.fraction}});
}

}  // namespace

RecoverReport run_recover(const ExperimentConfig& cfg) {
  cfg.validate();
  RecoverReport rep;
  rep.trials.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, cfg.jobs,
               [&](int i) { rep.trials[static_cast<std::size_t>(i)] = recover_trial(cfg, i); });
  summarize(rep);
  emit_recover(cfg, rep, "recover");
  return rep;
}

RecoverReport run_cluster(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.data != ExperimentConfig::Data::Clusters) {
    throw ConfigError("data.kind: the cluster study needs 'clusters' data");
  }
  RecoverReport rep;
  rep.trials.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, cfg.jobs,
               [&](int i) { rep.trials[static_cast<std::size_t>(i)] = cluster_trial(cfg, i); });
  summarize(rep);
  emit_recover(cfg, rep, "cluster");
  return rep;
}

PhaseReport run_phase(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.sweep_param.empty() && !cfg.sweep_values.empty()) {
    throw ConfigError("grid.param: required when grid.values is given");
  }
  PhaseReport rep = grid(cfg, cfg.sweep_param, &recover_trial_default);
  emit_grid(cfg, rep, cfg.sweep_param, "phase");
  return rep;
}

PhaseReport run_cluster_grid(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.data != ExperimentConfig::Data::Clusters) {
    throw ConfigError("data.kind: the cluster study needs 'clusters' data");
  }
  PhaseReport rep = grid(cfg, "k", &cluster_trial);
  emit_grid(cfg, rep, "k", "cluster");
  return rep;
}

int select_lambda(const std::vector<NoiseStep>& steps, double plateau_factor) {
  if (steps.empty()) return -1;
  double floor = std::numeric_limits<double>::infinity();
  for (const auto& s : steps) floor = std::min(floor, s.resid_clean);
  int best = -1;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].resid_clean > plateau_factor * floor) continue;
    if (best < 0 || steps[i].lifted_resid < steps[static_cast<std::size_t>(best)].lifted_resid) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

NoiseReport run_noise(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.sensing != ExperimentConfig::Sensing::Dense) {
    throw ConfigError("sensing.kind: the noise study needs dense sensing");
  }
  Problem p = make_problem(cfg, seed);
  NoiseReport rep;
  rep.noise_norm = (p.clean - p.meas->rhs()).norm();
  ProductPoint z = p.start;
  double lambda = cfg.lambda.lambda0;
  for (int i = 0; i < cfg.lambda.steps; ++i, lambda *= cfg.lambda.factor) {
    const Objective obj = p.objective.with_penalty(lambda);
    SolveResult res = rtr_solve(obj, z, cfg.rtr, &p.truth);
    z = res.z;
    NoiseStep s;
    s.lambda = lambda;
    const Vector ax = p.meas->apply(z.x);
    s.resid_clean = (ax - p.clean).norm();
    s.resid_noisy = (ax - p.meas->rhs()).norm();
    s.error = (z.x - p.truth).norm();
    s.lifted_resid = std::sqrt(std::max(0.0, obj.lifted_residual(z)));
    s.iterations = std::max(0, static_cast<int>(res.trace.rows.size()) - 1);
    s.status = res.trace.status;
    rep.steps.push_back(s);
  }
  rep.selected = select_lambda(rep.steps, cfg.lambda.plateau_factor);
  return rep;
}

RankSweepReport run_rank_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  RankSweepReport rep;
  rep.offsets = cfg.rank_offsets;
  rep.trials.assign(rep.offsets.size(), std::vector<TrialResult>(static_cast<std::size_t>(cfg.trials)));
  std::vector<Eigen::Index> true_rank(static_cast<std::size_t>(cfg.trials));
  std::vector<Eigen::Index> ambient(static_cast<std::size_t>(cfg.trials));
  for (int t = 0; t < cfg.trials; ++t) {
    const Problem p = make_problem(cfg, trial_seed(cfg.seed, t));
    true_rank[static_cast<std::size_t>(t)] = p.true_rank;
    ambient[static_cast<std::size_t>(t)] = p.objective.grassmann_ambient();
  }
  const int cells = static_cast<int>(rep.offsets.size()) * cfg.trials;
  std::vector<char> valid(static_cast<std::size_t>(cells), 0);
  parallel_for(cells, cfg.jobs, [&](int c) {
    const auto oi = static_cast<std::size_t>(c / cfg.trials);
    const int t = c % cfg.trials;
    const Eigen::Index r = true_rank[static_cast<std::size_t>(t)] + rep.offsets[oi];
    if (r < 1 || r > ambient[static_cast<std::size_t>(t)]) return;
    rep.trials[oi][static_cast<std::size_t>(t)] = recover_trial(cfg, t, r);
    valid[static_cast<std::size_t>(c)] = 1;
  });
  for (std::size_t oi = 0; oi < rep.offsets.size(); ++oi) {
    int ok = 0;
    int n = 0;
    for (int t = 0; t < cfg.trials; ++t) {
      if (!valid[oi * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(t)]) continue;
      ++n;
      ok += rep.trials[oi][static_cast<std::size_t>(t)].success ? 1 : 0;
    }
    rep.fraction.push_back(n > 0 ? static_cast<double>(ok) / n : 0.0);
  }
  if (!cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out);
    std::ofstream os(cfg.out + "/heatmap.csv");
    os << "rank_offset,success_fraction\n";
    char buf[64];
    for (std::size_t i = 0; i < rep.offsets.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", rep.fraction[i]);
      os << rep.offsets[i] << ',' << buf << '\n';
    }
    std::vector<TrialResult> all;
    for (const auto& row : rep.trials) {
      for (const auto& t : row) all.push_back(t);
    }
    write_trials_csv(cfg.out + "/trials.csv", all);
    write_json(cfg.out + "/summary.json", json{{"command", "rank-sweep"},
                                               {"config", to_json(cfg)},
                                               {"offsets", rep.offsets},
                                               {"fraction", rep.fraction}});
  }
  return rep;
}

void write_trials_csv(const std::string& path, const std::vector<TrialResult>& trials) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  os << "trial,seed,rank,rmse,success,status,iterations,final_gnorm,final_cost,rand_index\n";
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& t : trials) {
    os << t.index << ',' << t.seed << ',' << t.rank << ',' << num(t.rmse) << ',' << (t.success ? 1 : 0)
       << ',' << to_string(t.status) << ',' << t.iterations << ',' << num(t.final_gnorm) << ','
       << num(t.final_cost) << ',' << num(t.rand_index) << '\n';
  }
}

void write_heatmap_csv(const std::string& path, const PhaseReport& rep, const std::string& param) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  char buf[64];
  os << (param.empty() ? "param" : param);
  for (double d : rep.deltas) {
    std::snprintf(buf, sizeof buf, "%.17g", d);
    os << ",delta=" << buf;
  }
  os << '\n';
  for (std::size_t i = 0; i < rep.params.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", rep.params[i]);
    os << buf;
    for (double f : rep.fraction[i]) {
      std::snprintf(buf, sizeof buf, "%.17g", f);
      os << ',' << buf;
    }
    os << '\n';
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  os << j.dump(2) << '\n';
}

}  // namespace nlrec
