#pragma once

#include "cemppc/bounds.hpp"
#include "cemppc/mpc.hpp"

#include <cstdint>
#include <utility>
#include <string>
#include <vector>

namespace cemppc {

/// One inequality family lhs ≤ rhs. Slack is rhs − lhs, divided by
/// max(1, |rhs|) unless the check is absolute; a violation is slack below
/// −tolerance.
struct CheckResult {
    std::string name;
    double tolerance = 1e-9;
    bool relative = true;
    long instances = 0;
    long violations = 0;
    double worst_slack = kInf;

    CheckResult() = default;
    explicit CheckResult(std::string check_name, double tol = 1e-9, bool rel = true)
        : name(std::move(check_name)), tolerance(tol), relative(rel) {}

    void observe(double lhs, double rhs);
    void merge(const CheckResult& other);
    [[nodiscard]] bool ok() const noexcept { return violations == 0; }
};

struct SoundnessReport {
    std::vector<CheckResult> checks;

    [[nodiscard]] bool ok() const;
    /// Adds `result` or folds it into the entry with the same name.
    void add(const CheckResult& result);
    void merge(const SoundnessReport& other);
    [[nodiscard]] std::string summary() const;
};

/// Randomized instance families for the matrix and QP lemmas. Each suite
/// draws at least `instances` cases and is deterministic in `seed`.
namespace lemmas {

CheckResult matrix_power(std::uint64_t seed, int instances = 500);
CheckResult theta(std::uint64_t seed, int instances = 200);
CheckResult qp_sensitivity(std::uint64_t seed, int instances = 200);
CheckResult input_difference(std::uint64_t seed, int instances = 200);
CheckResult multi_step_error(std::uint64_t seed, int instances = 200);
CheckResult one_step_h(std::uint64_t seed, int instances = 200);
CheckResult quadratic_norm(std::uint64_t seed, int instances = 500);
CheckResult square_root(std::uint64_t seed, int instances = 200);
CheckResult gelfand_decay(std::uint64_t seed, int instances = 200);

SoundnessReport run_all(std::uint64_t seed);

} // namespace lemmas

/// Step-wise oracles along a closed loop driven by the model-based law.
/// `traj` must come from closed_loop_simulate(true_sys, model, W, U, N, ·).
struct TrajectoryChecks {
    CheckResult rdp{"rdp_decrease", 1e-9, false};  // V̂(x⁺) − V̂(x) ≤ −margin·l, only when margin > 0
    CheckResult one_step_h{"one_step_h_trajectory"}; // ‖Δx‖² ≤ h·l
    CheckResult terminal_decay{"terminal_decay"};  // ‖ψ̂(N)‖²_Q ≤ γρ_γ^{N−N₀}·l
    CheckResult ratio_bound{"ratio_bound"};        // V̂ ≤ L_V̂·l*
    CheckResult state_shift{"state_shift", 1e-10};
    bool extension_admissible = true;              // ψ̂(N) + Â^{N−1}Δx ∈ Ω_K̂ at every step
    double rdp_min_slack = kInf;                   // absolute
};

[[nodiscard]] TrajectoryChecks check_trajectory(const LinearSystem& true_sys, const LinearSystem& model,
                                                const CostWeights& W, const InputPolytope& U,
                                                const CertificateBundle& bundle, const Trajectory& traj);

} // namespace cemppc
