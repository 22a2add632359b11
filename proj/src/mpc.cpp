#include "cemppc/mpc.hpp"

#include "cemppc/error.hpp"

#include <cmath>
#include <string>

namespace cemppc {

namespace {

void require_horizon(int N) {
    if (N < 1) {
        fail(ErrorKind::InvalidHorizon, "prediction horizon must be >= 1, got " + std::to_string(N));
    }
}

} // namespace

PredictionMatrices build_prediction_matrices(const LinearSystem& sys, int N) {
    require_horizon(N);
    const int n = sys.n();
    const int m = sys.m();
    PredictionMatrices pm{Matrix::Zero((N + 1) * n, n), Matrix::Zero((N + 1) * n, N * m)};

    // powers[k] = A^k B, built once and copied down each block diagonal.
    std::vector<Matrix> AkB;
    AkB.reserve(static_cast<std::size_t>(N));
    Matrix Ak = Matrix::Identity(n, n);
    for (int k = 0; k <= N; ++k) {
        pm.Phi.block(k * n, 0, n, n) = Ak;
        if (k < N) {
            AkB.push_back(Ak * sys.B());
        }
        Ak = sys.A() * Ak;
    }
    for (int k = 1; k <= N; ++k) {
        for (int j = 0; j < k; ++j) {
            pm.Gamma.block(k * n, j * m, n, m) = AkB[static_cast<std::size_t>(k - j - 1)];
        }
    }
    return pm;
}

StackedWeights stack_weights(const CostWeights& W, int N) {
    require_horizon(N);
    return {numerics::block_diagonal(W.Q(), N + 1), numerics::block_diagonal(W.R(), N)};
}

CondensedQp build_condensed_qp(const LinearSystem& sys, const CostWeights& W, const InputPolytope& U, int N,
                               const Vector& x) {
    if (W.Q().rows() != sys.n() || W.R().rows() != sys.m() || U.m() != sys.m() || x.size() != sys.n()) {
        fail(ErrorKind::InvalidInput, "build_condensed_qp: dimension mismatch");
    }
    const auto pm = build_prediction_matrices(sys, N);
    const auto sw = stack_weights(W, N);
    const Matrix GtQ = pm.Gamma.transpose() * sw.Q_bar;
    CondensedQp qp;
    qp.H = sw.R_bar + GtQ * pm.Gamma;
    qp.H = (0.5 * (qp.H + qp.H.transpose())).eval();
    qp.b = GtQ * (pm.Phi * x);
    qp.G = numerics::block_diagonal(U.F(), N);
    qp.rhs = Vector::Ones(qp.G.rows());
    return qp;
}

Vector open_loop_predict(const LinearSystem& sys, const Vector& x, const Vector& u_stack, int k) {
    const int m = sys.m();
    if (x.size() != sys.n() || u_stack.size() % m != 0) {
        fail(ErrorKind::InvalidInput, "open_loop_predict: dimension mismatch");
    }
    if (k < 0 || static_cast<Eigen::Index>(k) * m > u_stack.size()) {
        fail(ErrorKind::InvalidInput, "open_loop_predict: k = " + std::to_string(k) + " is out of range");
    }
    Vector state = x;
    for (int i = 0; i < k; ++i) {
        state = sys.step(state, u_stack.segment(i * m, m));
    }
    return state;
}

double horizon_cost(const LinearSystem& sys, const CostWeights& W, const Vector& x, const Vector& u_stack) {
    const int m = sys.m();
    const int N = static_cast<int>(u_stack.size() / m);
    const Vector zero = Vector::Zero(m);
    Vector state = x;
    double cost = 0.0;
    for (int k = 0; k < N; ++k) {
        const Vector u = u_stack.segment(k * m, m);
        cost += stage_cost(state, u, W);
        state = sys.step(state, u);
    }
    return cost + stage_cost(state, zero, W);
}

MpcController::MpcController(LinearSystem model, CostWeights W, InputPolytope U, int N)
    : model_(std::move(model)), W_(std::move(W)), U_(std::move(U)), N_(N) {
    require_horizon(N_);
    if (W_.Q().rows() != model_.n() || W_.R().rows() != model_.m() || U_.m() != model_.m()) {
        fail(ErrorKind::InvalidInput, "MpcController: dimension mismatch between model, weights and input set");
    }
    pm_ = build_prediction_matrices(model_, N_);
    sw_ = stack_weights(W_, N_);
    const Matrix GtQ = pm_.Gamma.transpose() * sw_.Q_bar;
    H_ = sw_.R_bar + GtQ * pm_.Gamma;
    H_ = (0.5 * (H_ + H_.transpose())).eval();
    linear_map_ = GtQ * pm_.Phi;
    G_ = numerics::block_diagonal(U_.F(), N_);
}

MpcSolution MpcController::solve(const Vector& x) const {
    if (x.size() != model_.n()) {
        fail(ErrorKind::InvalidInput, "MpcController::solve: state dimension mismatch");
    }
    numerics::require_finite(x, "state");
    const CondensedQp qp{H_, linear_map_ * x, G_, Vector::Ones(G_.rows())};
    auto qs = qp_solve(qp);
    MpcSolution sol;
    sol.u0 = qs.u.head(model_.m());
    sol.value = horizon_cost(model_, W_, x, qs.u);
    sol.iterations = qs.iterations;
    sol.u_stack = std::move(qs.u);
    return sol;
}

MpcSolution mpc_control_law(const LinearSystem& model, const CostWeights& W, const InputPolytope& U, int N,
                            const Vector& x) {
    return MpcController(model, W, U, N).solve(x);
}

Trajectory closed_loop_simulate(const LinearSystem& true_sys, const LinearSystem& model, const CostWeights& W,
                                const InputPolytope& U, int N, const Vector& x0, const SimulationOptions& options) {
    if (options.t_max < 1) {
        fail(ErrorKind::InvalidInput, "closed_loop_simulate: t_max must be >= 1");
    }
    if (true_sys.n() != model.n() || true_sys.m() != model.m()) {
        fail(ErrorKind::InvalidInput, "closed_loop_simulate: true system and model dimensions differ");
    }
    numerics::require_finite(x0, "x0");
    const MpcController controller(model, W, U, N);

    Trajectory traj;
    Vector x = x0;
    traj.states.push_back(x);
    for (int t = 0; t < options.t_max; ++t) {
        auto sol = controller.solve(x);
        traj.solver_iterations += sol.iterations;
        const double l = stage_cost(x, sol.u0, W);
        traj.values.push_back(sol.value);
        traj.inputs.push_back(sol.u0);
        traj.stage_costs.push_back(l);
        traj.total_cost += l;
        x = true_sys.step(x, sol.u0);
        traj.plans.push_back(std::move(sol.u_stack));
        traj.states.push_back(x);
        if (!x.allFinite() || x.norm() > options.divergence_norm) {
            fail(ErrorKind::Divergence, "closed_loop_simulate: state norm exceeded " +
                                            std::to_string(options.divergence_norm) + " at t = " + std::to_string(t + 1));
        }
        if (l < options.term_tol) {
            traj.converged = true;
            break;
        }
    }
    const auto last = controller.solve(x);
    traj.solver_iterations += last.iterations;
    traj.values.push_back(last.value);
    return traj;
}

VInfinityEstimate approx_v_infinity(const LinearSystem& true_sys, const CostWeights& W, const InputPolytope& U,
                                    const Vector& x0, double rel_tol) {
    constexpr int kFirstHorizon = 8;
    constexpr int kLastHorizon = 512;
    double previous = kInf;
    for (int N = kFirstHorizon; N <= kLastHorizon; N *= 2) {
        double cost = kInf;
        try {
            const auto traj = closed_loop_simulate(true_sys, true_sys, W, U, N, x0);
            if (traj.converged) {
                cost = traj.total_cost;
            }
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Divergence) {
                // keep doubling; a longer horizon may still stabilize
            } else if (N > kFirstHorizon &&
                       (e.kind() == ErrorKind::InvalidInput || e.kind() == ErrorKind::SolverFailure)) {
                // For unstable plants the condensed Hessian grows like ρ(A)^{2N}; past
                // some N it is numerically singular and no longer horizon can be tried.
                fail(ErrorKind::RoaMembershipUnknown, "approx_v_infinity: closed-loop cost did not settle before the "
                                                      "condensed QP broke down at N = " +
                                                          std::to_string(N) + " (" + e.what() + ")");
            } else {
                throw;
            }
        }
        if (std::isfinite(cost) && std::isfinite(previous) && std::abs(cost - previous) <= rel_tol * std::abs(cost)) {
            return {cost, mpc_control_law(true_sys, W, U, N, x0).value, N};
        }
        previous = cost;
    }
    fail(ErrorKind::RoaMembershipUnknown,
         "approx_v_infinity: closed-loop cost did not settle up to N = " + std::to_string(kLastHorizon));
}

} // namespace cemppc
