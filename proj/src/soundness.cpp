#include "cemppc/soundness.hpp"

#include "cemppc/error.hpp"
#include "cemppc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cemppc {

void CheckResult::observe(double lhs, double rhs) {
    ++instances;
    double slack = rhs - lhs;
    if (relative && std::isfinite(rhs)) {
        slack /= std::max(1.0, std::abs(rhs));
    }
    if (std::isnan(slack)) {
        slack = -kInf;
    }
    worst_slack = std::min(worst_slack, slack);
    if (slack < -tolerance) {
        ++violations;
    }
}

void CheckResult::merge(const CheckResult& other) {
    instances += other.instances;
    violations += other.violations;
    worst_slack = std::min(worst_slack, other.worst_slack);
}

bool SoundnessReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.ok(); });
}

void SoundnessReport::add(const CheckResult& result) {
    for (auto& c : checks) {
        if (c.name == result.name) {
            c.merge(result);
            return;
        }
    }
    checks.push_back(result);
}

void SoundnessReport::merge(const SoundnessReport& other) {
    for (const auto& c : other.checks) {
        add(c);
    }
}

std::string SoundnessReport::summary() const {
    std::ostringstream out;
    out.precision(6);
    for (const auto& c : checks) {
        out << (c.ok() ? "PASS " : "FAIL ") << c.name << ": " << c.instances << " instances, " << c.violations
            << " violations, worst slack " << c.worst_slack << "\n";
    }
    return out.str();
}

namespace lemmas {

namespace {

using Rng = std::mt19937_64;

Matrix gaussian(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < M.size(); ++i) {
        M.data()[i] = g(rng);
    }
    return M;
}

Vector gaussian_vec(Rng& rng, Eigen::Index n, double scale = 1.0) { return gaussian(rng, n, 1, scale).col(0); }

Matrix random_spd(Rng& rng, Eigen::Index n) {
    const Matrix M = gaussian(rng, n, n);
    return M * M.transpose() + 0.1 * Matrix::Identity(n, n);
}

// Perturbation with Frobenius norm ≤ radius; half of the draws sit on the sphere.
Matrix ball(Rng& rng, Eigen::Index r, Eigen::Index c, double radius) {
    if (radius == 0.0) {
        return Matrix::Zero(r, c);
    }
    Matrix D = gaussian(rng, r, c);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double scale = u(rng) < 0.5 ? 1.0 : u(rng);
    D *= radius * scale / D.norm();
    while (D.norm() > radius) {
        D *= 1.0 - 1e-15;
    }
    return D;
}

int pick(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Box |u_i| ≤ w_i written as F u ≤ 1.
InputPolytope random_box(Rng& rng, int m) {
    Matrix F = Matrix::Zero(2 * m, m);
    for (int i = 0; i < m; ++i) {
        F(2 * i, i) = 1.0 / uniform(rng, 0.05, 1.0);
        F(2 * i + 1, i) = -1.0 / uniform(rng, 0.05, 1.0);
    }
    return InputPolytope(F);
}

struct MismatchCase {
    LinearSystem truth;
    LinearSystem model;
    UncertaintySpec spec;
};

MismatchCase random_pair(Rng& rng, int n, int m) {
    const Matrix A = gaussian(rng, n, n, 0.6);
    const Matrix B = gaussian(rng, n, m);
    const UncertaintySpec spec{uniform(rng, 0.0, 0.3), uniform(rng, 0.0, 0.3)};
    return {LinearSystem(A, B), LinearSystem(A + ball(rng, n, n, spec.delta_A), B + ball(rng, n, m, spec.delta_B)),
            spec};
}

} // namespace

CheckResult matrix_power(std::uint64_t seed, int instances) {
    Rng rng(seed);
    CheckResult out("matrix_power");
    constexpr int kMaxPower = 8;
    for (int t = 0; t < instances; ++t) {
        const auto c = random_pair(rng, pick(rng, 1, 4), pick(rng, 1, 3));
        const auto prop = mismatch_propagators(c.model, c.spec, kMaxPower, 1.0, 0.0, 0.0);
        Matrix Ai = Matrix::Identity(c.truth.n(), c.truth.n());
        Matrix Ahi = Ai;
        for (int i = 0; i <= kMaxPower; ++i) {
            out.observe(numerics::spectral_norm(Ai - Ahi), prop.g_x(i));
            out.observe(numerics::spectral_norm(Ai * c.truth.B() - Ahi * c.model.B()), prop.g_u(i));
            Ai = c.truth.A() * Ai;
            Ahi = c.model.A() * Ahi;
        }
    }
    return out;
}

CheckResult theta(std::uint64_t seed, int instances) {
    Rng rng(seed);
    CheckResult out("theta");
    for (int t = 0; t < instances; ++t) {
        const int n = pick(rng, 1, 3);
        const int m = pick(rng, 1, 2);
        const int N = pick(rng, 1, 6);
        const auto c = random_pair(rng, n, m);
        const CostWeights W(random_spd(rng, n), Matrix::Identity(m, m));
        const auto pm = build_prediction_matrices(c.truth, N);
        const auto pmh = build_prediction_matrices(c.model, N);
        const Matrix Qb = stack_weights(W, N).Q_bar;
        const auto prop = mismatch_propagators(c.model, c.spec, N, W.q_extremes().sigma_max,
                                               numerics::spectral_norm(pmh.Gamma), numerics::spectral_norm(pmh.Phi));
        out.observe(numerics::spectral_norm(pmh.Gamma.transpose() * Qb * pmh.Gamma -
                                            pm.Gamma.transpose() * Qb * pm.Gamma),
                    prop.theta_u);
        out.observe(
            numerics::spectral_norm(pmh.Gamma.transpose() * Qb * pmh.Phi - pm.Gamma.transpose() * Qb * pm.Phi),
            prop.theta_xu);
    }
    return out;
}

CheckResult qp_sensitivity(std::uint64_t seed, int instances) {
    Rng rng(seed);
    CheckResult out("qp_sensitivity");
    for (int t = 0; t < instances; ++t) {
        const int n = pick(rng, 1, 5);
        const Matrix Xi = random_spd(rng, n);
        const Matrix dXi = gaussian(rng, n, n, uniform(rng, 0.0, 0.3));
        Matrix Xi_hat = Xi + 0.5 * (dXi + dXi.transpose());
        const double lo = numerics::symmetric_eigenvalues(Xi_hat)(0);
        if (lo < 0.05) {
            Xi_hat += (0.05 - lo) * Matrix::Identity(n, n);
        }
        const Vector zeta = gaussian_vec(rng, n, 2.0);
        const Vector zeta_hat = zeta + gaussian_vec(rng, n, uniform(rng, 0.0, 0.5));
        const auto box = random_box(rng, n);
        const Vector ones = Vector::Ones(box.rows());
        const auto a = qp_solve({Xi, zeta, box.F(), ones});
        const auto b = qp_solve({Xi_hat, zeta_hat, box.F(), ones});
        double diam2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double w = 1.0 / box.F()(2 * i, i) - 1.0 / box.F()(2 * i + 1, i);
            diam2 += w * w;
        }
        const double sens = (a.u.norm() * numerics::spectral_norm(Xi - Xi_hat) + (zeta - zeta_hat).norm()) /
                            numerics::symmetric_eigenvalues(Xi_hat)(0);
        out.observe((a.u - b.u).norm(), std::min(std::sqrt(diam2), sens));
    }
    return out;
}

namespace {

struct MpcCase {
    MismatchCase pair;
    CostWeights W;
    InputPolytope U;
    int N;
    Vector x;
};

MpcCase random_mpc_case(Rng& rng) {
    const int n = pick(rng, 1, 3);
    const int m = pick(rng, 1, 2);
    auto pair = random_pair(rng, n, m);
    CostWeights W(random_spd(rng, n), random_spd(rng, m));
    auto U = random_box(rng, m);
    return {std::move(pair), std::move(W), std::move(U), pick(rng, 1, 8), gaussian_vec(rng, n)};
}

} // namespace

CheckResult input_difference(std::uint64_t seed, int instances) {
    Rng rng(seed);
    CheckResult out("input_difference");
    for (int t = 0; t < instances; ++t) {
        const auto c = random_mpc_case(rng);
        const auto u_true = mpc_control_law(c.pair.truth, c.W, c.U, c.N, c.x).u_stack;
        const auto u_hat = mpc_control_law(c.pair.model, c.W, c.U, c.N, c.x).u_stack;
        const auto norms = model_norms(c.pair.model, c.W, c.N);
        const auto prop = mismatch_propagators(c.pair.model, c.pair.spec, c.N, c.W.q_extremes().sigma_max,
                                               norms.Gamma_norm, norms.Phi_norm);
        out.observe((u_true - u_hat).norm(),
                    input_difference_bound(prop, norms.H_sigma_min, input_set_extremes(c.U), c.N, c.x));
    }
    return out;
}

CheckResult multi_step_error(std::uint64_t seed, int instances) {
    Rng rng(seed);
    CheckResult out("multi_step_error");
    for (int t = 0; t < instances; ++t) {
        const auto c = random_mpc_case(rng);
        const auto u_hat = mpc_control_law(c.pair.model, c.W, c.U, c.N, c.x).u_stack;
        double err = 0.0;
        for (int k = 0; k <= c.N; ++k) {
            err += (open_loop_predict(c.pair.truth, c.x, u_hat, k) - open_loop_predict(c.pair.model, c.x, u_hat, k))
                       .squaredNorm();
        }
        const auto prop = mismatch_propagators(c.pair.model, c.pair.spec, c.N, 1.0, 0.0, 0.0);
        out.observe(err, multi_step_error_bound(prop, input_set_extremes(c.U), c.N, c.x));
    }
    return out;
}

CheckResult one_step_h(std::uint64_t seed, int instances) {
    Rng rng(seed);
    CheckResult out("one_step_h");
    for (int t = 0; t < instances; ++t) {
        const int n = pick(rng, 1, 4);
        const int m = pick(rng, 1, 3);
        const auto c = random_pair(rng, n, m);
        const CostWeights W(random_spd(rng, n), random_spd(rng, m));
        const Vector x = gaussian_vec(rng, n);
        const Vector u = gaussian_vec(rng, m);
        const Vector dx = (c.truth.A() - c.model.A()) * x + (c.truth.B() - c.model.B()) * u;
        out.observe(dx.squaredNorm(), one_step_error_coeff(c.spec, W) * stage_cost(x, u, W));
    }
    return out;
}

CheckResult quadratic_norm(std::uint64_t seed, int instances) {
    Rng rng(seed);
    CheckResult out("quadratic_norm");
    for (int t = 0; t < instances; ++t) {
        const int n = pick(rng, 1, 4);
        const int len = pick(rng, 1, 6);
        const Matrix Q = random_spd(rng, n);
        auto qn = [&](const Vector& v) { return v.dot(Q * v); };
        double sa = 0.0, sb = 0.0, plus = 0.0, minus = 0.0, middle = 0.0;
        for (int i = 0; i < len; ++i) {
            const Vector a = gaussian_vec(rng, n, uniform(rng, 0.01, 3.0));
            const Vector b = gaussian_vec(rng, n, uniform(rng, 0.01, 3.0));
            sa += qn(a);
            sb += qn(b);
            plus += qn(a + b);
            minus += qn(a - b);
            middle += qn(a) + qn(b) + 2.0 * std::sqrt(qn(a) * qn(b));
        }
        const double rhs = sa + sb + 2.0 * std::sqrt(sa * sb);
        out.observe(plus, middle);
        out.observe(minus, middle);
        out.observe(middle, rhs);
    }
    return out;
}

CheckResult square_root(std::uint64_t seed, int instances) {
    Rng rng(seed);
    CheckResult out("square_root");
    for (int t = 0; t < instances; ++t) {
        const double p = std::pow(10.0, uniform(rng, -3.0, 3.0));
        const double q = Budget::q(p);
        out.observe(0.0, q);
        out.observe(std::sqrt(1.0 / (4.0 * p * p)), p / (4.0 * p * p) + q); // tangent point
        for (int k = 0; k <= 180; ++k) {
            const double x = std::pow(10.0, -12.0 + 0.1 * k); // up to 1e6
            out.observe(std::sqrt(x), p * x + q);
        }
    }
    return out;
}

CheckResult gelfand_decay(std::uint64_t seed, int instances) {
    Rng rng(seed);
    CheckResult out("gelfand_decay");
    int made = 0;
    while (made < instances) {
        const int n = pick(rng, 1, 4);
        const int m = pick(rng, 1, 2);
        const LinearSystem sys(gaussian(rng, n, n, 0.7), gaussian(rng, n, m));
        const CostWeights W(random_spd(rng, n), random_spd(rng, m));
        GainConstants g;
        try {
            g = gain_constants(sys, W, numerics::solve_dare(sys.A(), sys.B(), W.Q(), W.R()).K);
        } catch (const Error&) {
            continue; // not stabilizable; draw again
        }
        ++made;
        const Matrix Acl = sys.A() + sys.B() * g.K;
        Matrix P = Matrix::Identity(n, n);
        for (int k = 0; k <= 50; ++k) {
            out.observe(numerics::spectral_norm(P), g.lambda_K * std::pow(std::sqrt(g.rho_K), k));
            P = Acl * P;
        }
    }
    return out;
}

SoundnessReport run_all(std::uint64_t seed) {
    SoundnessReport r;
    r.add(matrix_power(seed + 1));
    r.add(theta(seed + 2));
    r.add(qp_sensitivity(seed + 3));
    r.add(input_difference(seed + 4));
    r.add(multi_step_error(seed + 5));
    r.add(one_step_h(seed + 6));
    r.add(quadratic_norm(seed + 7));
    r.add(square_root(seed + 8));
    r.add(gelfand_decay(seed + 9));
    return r;
}

} // namespace lemmas

TrajectoryChecks check_trajectory(const LinearSystem& true_sys, const LinearSystem& model, const CostWeights& W,
                                  const InputPolytope& U, const CertificateBundle& bundle, const Trajectory& traj) {
    TrajectoryChecks out;
    const int N = bundle.N;
    const int m = model.m();
    const auto& st = bundle.stability;
    const auto& dec = bundle.decrease;
    const double margin = dec.margin;
    const double decay = N >= st.N0 ? st.gamma * std::pow(st.rho_gamma, N - st.N0) : kInf;

    const Matrix K_hat = dec.K_hat ? dec.K_hat->K : st.gain.K;
    const double eps_hat = std::min(epsilon_K(K_hat, U, W.Q()), kEpsilonCap);

    // Â^{N−1}
    Matrix AN1 = Matrix::Identity(model.n(), model.n());
    for (int i = 0; i < N - 1; ++i) {
        AN1 = model.A() * AN1;
    }

    for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
        const Vector& x = traj.states[t];
        const Vector& xn = traj.states[t + 1];
        const Vector& u = traj.inputs[t];
        const Vector& plan = traj.plans[t];
        const double l = stage_cost(x, u, W);
        const double lstar = x.dot(W.Q() * x);
        const Vector dx = xn - model.step(x, u);
        (void)true_sys;

        out.one_step_h.observe(dx.squaredNorm(), dec.h * l);

        if (margin > 0.0) {
            const double lhs = traj.values[t + 1] - traj.values[t];
            const double rhs = -margin * l;
            out.rdp.observe(lhs, rhs);
            out.rdp_min_slack = std::min(out.rdp_min_slack, rhs - lhs);
        }

        // The terminal lemmas assume V̂_N(x) ≤ M_V̂.
        const bool in_level_set = traj.values[t] <= st.M_Vhat * (1.0 + 1e-12) + 1e-15;
        const Vector xN = open_loop_predict(model, x, plan, N);
        if (in_level_set) {
            out.ratio_bound.observe(traj.values[t], st.L_Vhat * lstar);
            if (N >= st.N0) {
                out.terminal_decay.observe(xN.dot(W.Q() * xN), decay * l);
            }
        }

        // shifted plan v = [û*(1..N−1), 0]
        Vector v = Vector::Zero(plan.size());
        v.head(plan.size() - m) = plan.tail(plan.size() - m);
        Matrix Ak = Matrix::Identity(model.n(), model.n());
        for (int k = 0; k < N; ++k) {
            const Vector lhs = open_loop_predict(model, xn, v, k);
            const Vector rhs = open_loop_predict(model, x, plan, k + 1) + Ak * dx;
            const double scale = std::max({1.0, lhs.norm(), rhs.norm()});
            out.state_shift.observe((lhs - rhs).norm() / scale, 0.0);
            Ak = model.A() * Ak;
        }

        const Vector deviated = xN + AN1 * dx;
        if (deviated.dot(W.Q() * deviated) > eps_hat) {
            out.extension_admissible = false;
        }
    }
    return out;
}

} // namespace cemppc
