#include "nlrec/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

using namespace nlrec;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::optional<std::string> solver;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment config");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--trials", o.trials, "number of trials");
  cmd->add_option("--jobs", o.jobs, "worker threads (1 = bit-exact)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--solver", o.solver, "rtr2|altmin1|altmin2|simple");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg = o.config.empty() ? parse_config(nlohmann::json::object()) : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.trials = *o.trials;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.out) cfg.out = *o.out;
  if (o.solver) cfg.solver = parse_solver(*o.solver);
  cfg.validate();
  return cfg;
}

void print_recover(const RecoverReport& rep) {
  for (const auto& t : rep.trials) {
    std::printf("trial %d  rank %ld  rmse %.3e  %s  iters %d  |grad| %.3e", t.index,
                static_cast<long>(t.rank), t.rmse, to_string(t.status), t.iterations, t.final_gnorm);
    if (t.rand_index >= 0.0) std::printf("  rand %.4f", t.rand_index);
    std::printf("  %s\n", t.success ? "ok" : "fail");
  }
  std::printf("success %.3f  mean rmse %.3e\n", rep.success_fraction, rep.mean_rmse);
}

void print_grid(const PhaseReport& rep, const std::string& param) {
  std::printf("%-8s", param.c_str());
  for (double d : rep.deltas) std::printf(" %6.2f", d);
  std::printf("\n");
  for (std::size_t i = 0; i < rep.params.size(); ++i) {
    std::printf("%-8g", rep.params[i]);
    for (double f : rep.fraction[i]) std::printf(" %6.2f", f);
    std::printf("\n");
  }
}

// Derivative checks on small random instances plus a few manifold identities.
bool run_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  bool ok = true;
  UosSpec uos;
  uos.n = 4;
  uos.pts_per = 6;
  const Matrix m = gen_uos(uos, rng).m;
  auto meas = std::make_shared<const MeasurementSubspace>(gen_entry_mask(m, 0.7, rng));
  std::normal_distribution<double> normal;

  struct Case {
    const char* name;
    LiftingSpec lifting;
    CostForm form;
  };
  const std::vector<Case> cases{
      {"monomial kernel d=1", {MonomialKernel{1, 1.0}, m.rows()}, CostForm::KernelTrace},
      {"monomial kernel d=2", {MonomialKernel{2, 1.0}, m.rows()}, CostForm::KernelTrace},
      {"monomial kernel d=3", {MonomialKernel{3, 1.0}, m.rows()}, CostForm::KernelTrace},
      {"monomial features d=2", {MonomialFeatures{2}, m.rows()}, CostForm::Feature},
      {"gaussian", {GaussianKernel{2.5}, m.rows()}, CostForm::KernelTrace},
  };
  for (const auto& c : cases) {
    Objective obj(c.lifting, 3, c.form, meas);
    Matrix x0 = meas->feasible_point();
    ProductPoint z = obj.initial_point(x0);
    const ProductManifold man = obj.manifold();
    Matrix dx = Matrix::NullaryExpr(m.rows(), m.cols(), [&] { return normal(rng); });
    Matrix du = Matrix::NullaryExpr(z.u.ambient(), z.u.dim(), [&] { return normal(rng); });
    z = man.retract(z, man.project(z, dx, du));
    const FdReport r = fd_check(obj, z, 1e-5, seed);
    std::printf("%-24s grad %.2e  hess %.2e  sym %.2e  %s\n", c.name, r.grad_error, r.hess_error,
                r.symmetry_error, r.pass ? "ok" : "FAIL");
    ok = ok && r.pass;

    const ProductTangent xi = man.project(z, dx, du);
    const ProductTangent xi2 = man.project(z, xi.dx, xi.du);
    const double idem = man.norm(xi - xi2) / std::max(1.0, man.norm(xi));
    const ProductPoint z1 = man.retract(z, 0.3 * xi);
    const double orth =
        (z1.u.basis().transpose() * z1.u.basis() - Matrix::Identity(z1.u.dim(), z1.u.dim())).norm();
    const double feas = meas->residual(z1.x) / (1.0 + meas->rhs().norm());
    const bool good = idem <= 1e-12 && orth <= 1e-12 && feas <= 1e-9;
    std::printf("%-24s projection %.1e  orthonormality %.1e  feasibility %.1e  %s\n", "", idem, orth,
                feas, good ? "ok" : "FAIL");
    ok = ok && good;
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear matrix recovery by rank minimization of a lifting"};
  app.require_subcommand(1);
  Overrides o;
  std::vector<CLI::App*> cmds;
  const std::pair<const char*, const char*> subs[] = {
      {"recover", "recover missing entries over several trials"},
      {"phase", "success fraction over a grid of sizes and sampling rates"},
      {"noise", "lambda continuation for noisy dense sensing"},
      {"cluster", "recover, then cluster the completed columns"},
      {"rank-sweep", "success as the working rank moves off the true rank"}};
  for (const auto& [name, help] : subs) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, o);
    cmds.push_back(cmd);
  }
  std::uint64_t check_seed = 1;
  CLI::App* check = app.add_subcommand("check", "finite-difference and manifold checks");
  check->add_option("--seed", check_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (check->parsed()) return run_check(check_seed) ? 0 : 3;
    const ExperimentConfig cfg = resolve(o);
    if (cmds[0]->parsed()) {
      print_recover(run_recover(cfg));
    } else if (cmds[1]->parsed()) {
      print_grid(run_phase(cfg), cfg.sweep_param);
    } else if (cmds[2]->parsed()) {
      const NoiseReport rep = run_noise(cfg, cfg.seed);
      std::printf("|A(M)-b| = %.3e\n", rep.noise_norm);
      std::printf("%10s %12s %12s %12s %12s %6s\n", "lambda", "|AX-b~|", "|AX-b|", "|X-M|", "lifted",
                  "iters");
      for (std::size_t i = 0; i < rep.steps.size(); ++i) {
        const auto& s = rep.steps[i];
        std::printf("%10.1e %12.4e %12.4e %12.4e %12.4e %6d%s\n", s.lambda, s.resid_clean,
                    s.resid_noisy, s.error, s.lifted_resid, s.iterations,
                    static_cast<int>(i) == rep.selected ? "  <- selected" : "");
      }
      if (!cfg.out.empty()) {
        std::filesystem::create_directories(cfg.out);
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& s : rep.steps) {
          steps.push_back({{"lambda", s.lambda},
                           {"resid_clean", s.resid_clean},
                           {"resid_noisy", s.resid_noisy},
                           {"error", s.error},
                           {"lifted_resid", s.lifted_resid},
                           {"iterations", s.iterations},
                           {"status", to_string(s.status)}});
        }
        write_json(cfg.out + "/summary.json", {{"command", "noise"},
                                               {"config", to_json(cfg)},
                                               {"noise_norm", rep.noise_norm},
                                               {"selected", rep.selected},
                                               {"steps", steps}});
      }
    } else if (cmds[3]->parsed()) {
      if (cfg.deltas.empty()) print_recover(run_cluster(cfg));
      else print_grid(run_cluster_grid(cfg), "k");
    } else if (cmds[4]->parsed()) {
      const RankSweepReport rep = run_rank_sweep(cfg);
      for (std::size_t i = 0; i < rep.offsets.size(); ++i) {
        std::printf("r = true%+d  success %.3f\n", rep.offsets[i], rep.fraction[i]);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
