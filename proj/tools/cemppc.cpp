// Command-line driver: bounds, sweeps, Monte Carlo runs and soundness checks.
#include "cemppc/error.hpp"
#include "cemppc/experiment.hpp"
#include "cemppc/mpc.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace cemppc;

namespace {

enum Exit { kOk = 0, kConfig = 1, kSoundness = 2, kIo = 3 };

struct Overrides {
    std::string config;
    std::optional<double> delta;
    std::optional<int> horizon;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::string> budget;
    std::optional<int> trials;
    std::optional<std::string> out;
    int trial = 0;
};

void add_common(CLI::App* cmd, Overrides& o, bool single_trial) {
    cmd->add_option("--config", o.config, "experiment config (JSON)")->required();
    cmd->add_option("--delta", o.delta, "mismatch radius, used for both A and B");
    cmd->add_option("--horizon", o.horizon, "prediction horizon");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--mode", o.mode, "baseline | extension");
    cmd->add_option("--budget", o.budget, "default | optimize");
    cmd->add_option("--out", o.out, "output directory");
    if (single_trial) {
        cmd->add_option("--trial", o.trial, "trial index of the sampled model")->check(CLI::NonNegativeNumber);
    } else {
        cmd->add_option("--trials", o.trials, "trials per grid point");
    }
}

// Loads the config and applies command-line overrides. A single --delta or
// --horizon also collapses the corresponding grid.
ExperimentConfig resolve(const Overrides& o) {
    auto cfg = load_config(o.config);
    if (o.delta) {
        cfg.delta = *o.delta;
        cfg.deltas = {*o.delta};
    }
    if (o.horizon) {
        cfg.horizon = *o.horizon;
        cfg.horizons = {*o.horizon};
    }
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (o.mode) {
        cfg.mode = parse_bound_mode(*o.mode);
    }
    if (o.budget) {
        if (*o.budget != "default" && *o.budget != "optimize") {
            fail(ErrorKind::Config, "--budget: expected default or optimize");
        }
        cfg.budget = *o.budget == "optimize" ? BudgetPolicy::Optimize : BudgetPolicy::Default;
    }
    if (o.trials) {
        cfg.trials = *o.trials;
    }
    if (o.out) {
        cfg.output_dir = *o.out;
    }
    cfg.validate();
    return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
}

std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void print_stats(const std::vector<GridStats>& stats) {
    std::printf("%-10s %4s %6s %6s  %-12s %-12s %-12s %-12s %-12s\n", "delta", "N", "stable", "failed", "alpha_N",
                "beta_N", "xi_N", "j_bound", "J_sim");
    for (const auto& s : stats) {
        std::printf("%-10s %4d %6ld %6ld  %-12s %-12s %-12s %-12s %-12s\n", g(s.delta_A).c_str(), s.N, s.stable,
                    s.failed, g(s.alpha_N.mean).c_str(), g(s.beta_N.mean).c_str(), g(s.xi_N.mean).c_str(),
                    g(s.j_bound.mean).c_str(), g(s.simulated_cost.mean).c_str());
    }
}

int emit_sweep(const ExperimentContext& ctx, const std::vector<ExperimentRecord>& records) {
    const fs::path dir = ctx.config.output_dir;
    const auto stats = grid_stats(records);
    emit_stats_csv(stats, dir / "stats.csv");
    emit_certificates(ctx, records, dir / "certificates");
    print_stats(stats);
    std::printf("v_inf(x0) = %.10g; records in %s\n", ctx.v_inf, (dir / "records.csv").c_str());
    emit_csv(records, dir / "records.csv"); // throws on a soundness violation, after writing
    return kOk;
}

int cmd_bound(const Overrides& o) {
    const auto ctx = prepare(resolve(o));
    const auto& def = ctx.system;
    const UncertaintySpec spec{ctx.config.delta, ctx.config.delta};
    SamplingOptions so;
    so.boundary = ctx.config.boundary_sampling;
    const auto model = sample_estimate(def.system, spec, trial_seed(ctx.config.seed, 0, static_cast<std::uint64_t>(o.trial)), so);
    CertifyOptions co;
    co.mode = ctx.config.mode;
    co.budget = ctx.config.budget;
    const auto bundle = certify(model, def.weights, def.input_set, spec, ctx.config.horizon, ctx.x0, ctx.v_inf, co);
    const auto text = certificate_json(bundle);
    std::cout << text << '\n';
    if (o.out) {
        write_file(fs::path(ctx.config.output_dir) / "certificate.json", text + "\n");
    }
    return kOk;
}

int cmd_simulate(const Overrides& o) {
    const auto ctx = prepare(resolve(o));
    const auto& def = ctx.system;
    const UncertaintySpec spec{ctx.config.delta, ctx.config.delta};
    const int N = ctx.config.horizon;
    SamplingOptions so;
    so.boundary = ctx.config.boundary_sampling;
    const auto model = sample_estimate(def.system, spec, trial_seed(ctx.config.seed, 0, static_cast<std::uint64_t>(o.trial)), so);
    const auto bundle = certify(model, def.weights, def.input_set, spec, N, ctx.x0, ctx.v_inf,
                                {ctx.config.mode, ctx.config.budget, std::nullopt, std::nullopt});
    const auto traj = closed_loop_simulate(def.system, model, def.weights, def.input_set, N, ctx.x0);

    std::string csv = "t";
    for (int i = 0; i < def.system.n(); ++i) {
        csv += ",x" + std::to_string(i);
    }
    for (int i = 0; i < def.system.m(); ++i) {
        csv += ",u" + std::to_string(i);
    }
    csv += ",stage_cost,v_hat_N\n";
    char buf[40];
    for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
        csv += std::to_string(t);
        for (double v : traj.states[t]) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            csv += buf;
        }
        for (double v : traj.inputs[t]) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            csv += buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g", traj.stage_costs[t]);
        csv += buf;
        std::snprintf(buf, sizeof buf, ",%.17g\n", traj.values[t]);
        csv += buf;
    }
    const fs::path path = fs::path(ctx.config.output_dir) / "trajectory.csv";
    write_file(path, csv);
    std::printf("steps %zu, converged %s, J_sim = %.10g, j_bound = %s, v_inf = %.10g\n", traj.inputs.size(),
                traj.converged ? "yes" : "no", traj.total_cost, g(bundle.performance.j_bound).c_str(), ctx.v_inf);
    std::printf("trajectory in %s\n", path.c_str());
    if (bundle.performance.stable && traj.total_cost > bundle.performance.j_bound) {
        fail(ErrorKind::SoundnessViolation, "simulated cost exceeds j_bound");
    }
    return kOk;
}

int cmd_soundness(const Overrides& o) {
    const auto ctx = prepare(resolve(o));
    const auto report = run_soundness_suite(ctx);
    std::string csv = "check,instances,violations,worst_slack,tolerance,relative\n";
    char buf[64];
    for (const auto& c : report.checks) {
        std::snprintf(buf, sizeof buf, ",%ld,%ld,%.17g,%.3g,%d\n", c.instances, c.violations, c.worst_slack,
                      c.tolerance, c.relative ? 1 : 0);
        csv += c.name + buf;
    }
    write_file(fs::path(ctx.config.output_dir) / "soundness.csv", csv);
    std::cout << report.summary();
    return report.ok() ? kOk : kSoundness;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::SoundnessViolation: return kSoundness;
    case ErrorKind::Io: return kIo;
    default: return kConfig;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certainty-equivalent MPC performance bounds"};
    app.require_subcommand(1);
    Overrides o;
    auto* bound = app.add_subcommand("bound", "certificate for one sampled model (JSON on stdout)");
    auto* sweep_delta = app.add_subcommand("sweep-delta", "trials over the delta grid at a fixed horizon");
    auto* sweep_horizon = app.add_subcommand("sweep-horizon", "trials over the horizon set at a fixed delta");
    auto* simulate = app.add_subcommand("simulate", "closed loop of one sampled model");
    auto* soundness = app.add_subcommand("soundness", "lemma suites and per-trial bound checks");
    auto* montecarlo = app.add_subcommand("montecarlo", "trials over the full delta x horizon grid");
    add_common(bound, o, true);
    add_common(simulate, o, true);
    for (auto* cmd : {sweep_delta, sweep_horizon, soundness, montecarlo}) {
        add_common(cmd, o, false);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e);
        return kConfig;
    }

    try {
        if (bound->parsed()) {
            return cmd_bound(o);
        }
        if (simulate->parsed()) {
            return cmd_simulate(o);
        }
        if (soundness->parsed()) {
            return cmd_soundness(o);
        }
        const auto ctx = prepare(resolve(o));
        if (sweep_delta->parsed()) {
            return emit_sweep(ctx, run_delta_sweep(ctx));
        }
        if (sweep_horizon->parsed()) {
            const auto records = run_horizon_sweep(ctx);
            const int rc = emit_sweep(ctx, records);
            const auto best = argmin_horizon(grid_stats(records));
            std::printf("argmin over N of mean j_bound: %s\n", best ? std::to_string(*best).c_str() : "none (no finite mean)");
            return rc;
        }
        return emit_sweep(ctx, run_monte_carlo(ctx));
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error [io]: " << e.what() << '\n';
        return kIo;
    }
}
