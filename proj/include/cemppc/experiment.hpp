#pragma once

#include "cemppc/bounds.hpp"
#include "cemppc/soundness.hpp"
#include "cemppc/system_model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cemppc {

struct ExperimentConfig {
    std::string system;                 // as written; relative paths resolve against base_dir
    std::filesystem::path base_dir;     // directory of the config file, not serialized
    std::vector<double> x0{0.2, 0.1};
    std::vector<int> horizons{6, 7, 8, 9, 10};
    std::vector<double> deltas;         // δ_A = δ_B = δ; defaults to 10 points over [1e-3, 1e-2]
    int trials = 100;
    std::uint64_t seed = 42;
    BoundMode mode = BoundMode::Baseline;
    BudgetPolicy budget = BudgetPolicy::Default;
    int horizon = 8;                    // fixed N of the δ sweep
    double delta = 5e-3;                // fixed δ of the horizon sweep
    bool boundary_sampling = false;
    bool record_timing = false;
    std::string output_dir = "results";

    ExperimentConfig();

    [[nodiscard]] std::filesystem::path system_path() const;
    void validate() const;

    bool operator==(const ExperimentConfig& other) const;
};

/// Missing file → Io; malformed content or a bad field → Config, naming the field.
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
[[nodiscard]] ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
[[nodiscard]] std::string dump_config(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// Stable 64-bit mix of (master seed, grid index, trial index).
[[nodiscard]] std::uint64_t trial_seed(std::uint64_t master, std::uint64_t grid_index, std::uint64_t trial_index);

struct ExperimentRecord {
    double delta_A = 0.0;
    double delta_B = 0.0;
    int N = 0;
    int trial = 0;
    std::uint64_t seed = 0;
    double alpha_N = kNaN;
    double beta_N = kNaN;
    double xi_N = kNaN;
    double eta_N = kNaN;
    double margin = kNaN;
    double j_bound = kNaN;
    double v_inf = kNaN;
    double simulated_cost = kNaN;
    bool stable = false;
    long solver_iterations = 0;
    double wall_time = 0.0;
    std::string status = "ok";          // "ok", or the error kind that stopped the trial
    double v_hat_N = kNaN;
    double rdp_min_slack = kNaN;
};

/// The loaded system and V_∞(x0) shared by every trial of a run.
struct ExperimentContext {
    ExperimentConfig config;
    SystemDefinition system;
    Vector x0;
    double v_inf = 0.0;
};

/// Loads the system file and estimates V_∞(x0) on the true plant.
[[nodiscard]] ExperimentContext prepare(const ExperimentConfig& cfg);

/// One sampled model, certified and simulated. Errors end up in `status`.
[[nodiscard]] ExperimentRecord run_trial(const ExperimentContext& ctx, const UncertaintySpec& spec, int N,
                                         std::size_t grid_index, int trial);

/// δ ascending at `horizon`, trials ascending.
[[nodiscard]] std::vector<ExperimentRecord> run_delta_sweep(const ExperimentContext& ctx);
/// N ascending at `delta`, trials ascending.
[[nodiscard]] std::vector<ExperimentRecord> run_horizon_sweep(const ExperimentContext& ctx);
/// Full deltas × horizons grid, δ-major.
[[nodiscard]] std::vector<ExperimentRecord> run_monte_carlo(const ExperimentContext& ctx);

struct SummaryStats {
    long count = 0;
    double mean = kNaN;
    double var = kNaN; // sample variance; NaN below two values or with infinite entries
    double min = kNaN;
    double max = kNaN;
};

/// Two-pass statistics over the finite-or-infinite values; NaNs are skipped.
[[nodiscard]] SummaryStats summarize(const std::vector<double>& values);

struct GridStats {
    double delta_A = 0.0;
    double delta_B = 0.0;
    int N = 0;
    long trials = 0;
    long failed = 0;
    long stable = 0;
    SummaryStats alpha_N, beta_N, xi_N, eta_N, j_bound, simulated_cost;
};

/// One entry per (δ_A, δ_B, N) in first-appearance order, over rows with status "ok".
[[nodiscard]] std::vector<GridStats> grid_stats(const std::vector<ExperimentRecord>& records);

/// Horizon with the smallest finite mean j_bound; ties go to the shorter one.
[[nodiscard]] std::optional<int> argmin_horizon(const std::vector<GridStats>& stats);

[[nodiscard]] const std::vector<std::string>& record_columns();

/// Writes the file, then throws SoundnessViolation if a stable row has
/// simulated_cost > j_bound. Unwritable path → Io.
void emit_csv(const std::vector<ExperimentRecord>& records, const std::filesystem::path& path);
void emit_stats_csv(const std::vector<GridStats>& stats, const std::filesystem::path& path);
[[nodiscard]] std::vector<ExperimentRecord> parse_records_csv(const std::string& text);

/// Certificates of every trial at each grid point, one JSON array per file.
void emit_certificates(const ExperimentContext& ctx, const std::vector<ExperimentRecord>& records,
                       const std::filesystem::path& dir);

/// Lemma suites plus the per-trial cost-bound, value-gap and trajectory oracles
/// over deltas × horizons.
[[nodiscard]] SoundnessReport run_soundness_suite(const ExperimentContext& ctx);

/// Worker count: CEMPPC_THREADS if set and positive, else hardware concurrency.
[[nodiscard]] unsigned worker_count();

} // namespace cemppc
