#include "cemppc/bounds.hpp"

#include "cemppc/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace cemppc {

namespace {

void require_horizon(int N) {
    if (N < 1) {
        fail(ErrorKind::InvalidHorizon, "prediction horizon must be >= 1, got " + std::to_string(N));
    }
}

double ipow(double base, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) {
        r *= base;
    }
    return r;
}

} // namespace

ModelNorms model_norms(const LinearSystem& model, const CostWeights& W, int N) {
    require_horizon(N);
    const auto pm = build_prediction_matrices(model, N);
    const auto sw = stack_weights(W, N);
    Matrix H = sw.R_bar + pm.Gamma.transpose() * sw.Q_bar * pm.Gamma;
    H = (0.5 * (H + H.transpose())).eval();
    ModelNorms out;
    out.N = N;
    out.A_norm = numerics::spectral_norm(model.A());
    out.B_norm = numerics::spectral_norm(model.B());
    out.Gamma_norm = numerics::spectral_norm(pm.Gamma);
    out.Phi_norm = numerics::spectral_norm(pm.Phi);
    out.H_sigma_min = numerics::symmetric_eigenvalues(H)(0);
    return out;
}

double MismatchPropagators::g_x(int i, int n) const {
    return ipow(gx.at(static_cast<std::size_t>(i)), n);
}

double MismatchPropagators::g_u(int i, int n) const {
    return ipow(gu.at(static_cast<std::size_t>(i)), n);
}

MismatchPropagators mismatch_propagators(const LinearSystem& model, const UncertaintySpec& spec, int N,
                                         double Qbar_sigma_max, double Gamma_hat_norm, double Phi_hat_norm) {
    require_horizon(N);
    spec.validate();
    const double a = numerics::spectral_norm(model.A());
    const double b = numerics::spectral_norm(model.B());
    const double dA = spec.delta_A;
    const double dB = spec.delta_B;

    MismatchPropagators p;
    p.N = N;
    p.gx.assign(static_cast<std::size_t>(N + 1), 0.0);
    p.gu.assign(static_cast<std::size_t>(N + 1), 0.0);
    for (int i = 0; i <= N; ++i) {
        // (δ+a)^i − a^i = δ Σ_j (δ+a)^{i−1−j} a^j; the expanded form never
        // cancels, so it stays exactly zero at δ = 0 and monotone in δ.
        double s = 0.0;
        for (int j = 0; j < i; ++j) {
            s += ipow(dA + a, i - 1 - j) * ipow(a, j);
        }
        const auto k = static_cast<std::size_t>(i);
        p.gx[k] = dA * s;
        p.gu[k] = (dB + b) * p.gx[k] + dB * ipow(a, i);
    }
    for (int i = 1; i <= N; ++i) {
        p.gbar_x += p.gx[static_cast<std::size_t>(i)];
        for (int j = 0; j < i; ++j) {
            p.gbar_u += p.gu[static_cast<std::size_t>(j)];
        }
    }
    p.theta_u = Qbar_sigma_max * (2.0 * Gamma_hat_norm * p.gbar_u + p.gbar_u * p.gbar_u);
    p.theta_xu = Qbar_sigma_max * (Gamma_hat_norm * p.gbar_x + Phi_hat_norm * p.gbar_u + p.gbar_x * p.gbar_u);
    return p;
}

double input_difference_bound(const MismatchPropagators& prop, double H_hat_sigma_min, const InputSetExtremes& extremes,
                              int N, const Vector& x) {
    if (!(H_hat_sigma_min > 0.0)) {
        fail(ErrorKind::Domain, "input_difference_bound: σ_min(Ĥ) must be positive");
    }
    const double diameter = std::sqrt(N * extremes.d_bar_u);
    const double sensitivity =
        (std::sqrt(N * extremes.u_bar) * prop.theta_u + x.norm() * prop.theta_xu) / H_hat_sigma_min;
    return std::min(diameter, sensitivity);
}

double multi_step_error_bound(const MismatchPropagators& prop, const InputSetExtremes& extremes, int N,
                              const Vector& x) {
    const double xx = x.squaredNorm();
    double total = 0.0;
    for (int k = 0; k <= N; ++k) {
        double coeff = prop.g_x(k, 2);
        for (int i = 0; i < k; ++i) {
            coeff += prop.g_u(k - i - 1, 2);
        }
        total += coeff * (xx + k * extremes.u_bar);
    }
    return total;
}

void Budget::validate() const {
    for (double p : {p1, p2, p3}) {
        if (!(p > 0.0) || !std::isfinite(p)) {
            fail(ErrorKind::InvalidBudget, "budget scalars p1, p2, p3 must be finite and positive");
        }
    }
}

ValueGapTerms value_gap_terms(const MismatchPropagators& prop, const ModelNorms& norms, const CostWeights& W,
                              const InputSetExtremes& extremes, const Vector& x) {
    const double sQ = W.q_extremes().sigma_max;
    const double sR = W.r_extremes().sigma_max;
    ValueGapTerms t;
    t.Delta_du = input_difference_bound(prop, norms.H_sigma_min, extremes, prop.N, x);
    t.Delta_psi = multi_step_error_bound(prop, extremes, prop.N, x);
    t.E_psi = sQ * t.Delta_psi;
    t.E_u = sR * t.Delta_du * t.Delta_du;
    const double lift = norms.Gamma_norm + prop.gbar_u;
    t.E_psi_u = (sQ / sR) * lift * lift * t.E_u;
    return t;
}

ValueGapBound apply_budget(const ValueGapTerms& terms, const Budget& budget) {
    budget.validate();
    const double q1 = Budget::q(budget.p1);
    const double q2 = Budget::q(budget.p2);
    const double q3 = Budget::q(budget.p3);
    const double sp = std::sqrt(terms.E_psi);
    const double su = std::sqrt(terms.E_u);
    const double spu = std::sqrt(terms.E_psi_u);

    ValueGapBound vg;
    vg.terms = terms;
    vg.budget = budget;
    vg.alpha_N = std::max(budget.p1 * sp + budget.p3 * spu + budget.p1 * budget.p3 * sp * spu, budget.p2 * su);
    vg.beta_N = (1.0 + budget.p1 * sp) * (q3 * spu + terms.E_psi_u) + q2 * su + terms.E_u + q1 * sp + sp;
    return vg;
}

ValueGapBound value_gap_constants(const LinearSystem& model, const UncertaintySpec& spec, const CostWeights& W,
                                  const InputPolytope& U, int N, const Vector& x, const Budget& budget) {
    budget.validate();
    const auto norms = model_norms(model, W, N);
    const auto prop =
        mismatch_propagators(model, spec, N, W.q_extremes().sigma_max, norms.Gamma_norm, norms.Phi_norm);
    return apply_budget(value_gap_terms(prop, norms, W, input_set_extremes(U), x), budget);
}

double one_step_error_coeff(const UncertaintySpec& spec, const CostWeights& W) {
    spec.validate();
    return spec.delta_A * spec.delta_A / W.q_extremes().sigma_min +
           spec.delta_B * spec.delta_B / W.r_extremes().sigma_min;
}

GainConstants gain_constants(const LinearSystem& model, const CostWeights& W, const Matrix& K) {
    if (K.rows() != model.m() || K.cols() != model.n()) {
        fail(ErrorKind::InvalidInput, "gain_constants: K must be m x n");
    }
    GainConstants g;
    g.K = K;
    const Matrix Acl = model.A() + model.B() * K;
    g.P = numerics::solve_dlyap(Acl);
    const auto pe = numerics::sym_eig_extremes(g.P);
    g.lambda_K = std::sqrt(pe.ratio);
    g.rho_K = 1.0 - 1.0 / pe.sigma_max;
    const auto& q = W.q_extremes();
    const double k2 = std::pow(numerics::spectral_norm(K), 2);
    g.C_star_K = (1.0 + W.r_extremes().sigma_max * k2 / q.sigma_min) * q.ratio * g.lambda_K * g.lambda_K;
    g.A_cl_norm = numerics::spectral_norm(Acl);
    return g;
}

StabilityCertificate stability_certificate(const LinearSystem& model, const CostWeights& W, const InputPolytope& U,
                                           double M_Vhat) {
    if (!(M_Vhat >= 0.0) || !std::isfinite(M_Vhat)) {
        fail(ErrorKind::InvalidInput, "stability_certificate: M_Vhat must be finite and nonnegative");
    }
    const auto dare = numerics::solve_dare(model.A(), model.B(), W.Q(), W.R());
    StabilityCertificate c;
    c.gain = gain_constants(model, W, dare.K);
    c.eps_K = epsilon_K(dare.K, U, W.Q());
    if (c.eps_K > kEpsilonCap) {
        c.eps_K = kEpsilonCap;
        c.eps_clamped = true;
    }
    c.gamma = c.gain.C_star_K / (1.0 - c.gain.rho_K);
    c.rho_gamma = (c.gamma - 1.0) / c.gamma;
    c.M_Vhat = M_Vhat;
    c.L_Vhat = std::max(c.gamma, M_Vhat / c.eps_K);
    c.N0 = static_cast<int>(std::ceil(std::max(0.0, (M_Vhat - c.gamma * c.eps_K) / c.eps_K)));
    return c;
}

std::string to_string(BoundMode mode) { return mode == BoundMode::Baseline ? "baseline" : "extension"; }

BoundMode parse_bound_mode(const std::string& text) {
    if (text == "baseline") {
        return BoundMode::Baseline;
    }
    if (text == "extension") {
        return BoundMode::Extension;
    }
    fail(ErrorKind::Config, "mode: expected \"baseline\" or \"extension\", got \"" + text + "\"");
}

DecreaseCertificate decrease_certificate(const StabilityCertificate& cert, const LinearSystem& model,
                                         const CostWeights& W, const UncertaintySpec& spec, int N, BoundMode mode,
                                         const std::optional<Matrix>& K_hat) {
    require_horizon(N);
    DecreaseCertificate d;
    d.mode = mode;
    d.N = N;
    d.h = one_step_error_coeff(spec, W);

    const double a2 = std::pow(numerics::spectral_norm(model.A()), 2);
    const double sQ = W.q_extremes().sigma_max;
    const double rQ = W.q_extremes().ratio;
    if (mode == BoundMode::Baseline) {
        d.terminal_coeff = 1.0 + a2 * rQ;
        d.eta_coeff = a2 * rQ;
    } else {
        if (!K_hat) {
            fail(ErrorKind::MissingGain, "extension mode needs a terminal feedback gain");
        }
        d.K_hat = gain_constants(model, W, *K_hat);
        const double acl2 = d.K_hat->A_cl_norm * d.K_hat->A_cl_norm;
        d.terminal_coeff = d.K_hat->C_star_K + rQ * acl2;
        d.eta_coeff = d.K_hat->C_star_K + acl2 * rQ - 1.0;
    }

    for (int i = 1; i <= N - 1; ++i) {
        d.G_N += ipow(a2, i - 1);
    }
    const double aN = ipow(a2, N - 1);
    // γρ_γ^{N−N₀} bounds the terminal stage only once N ≥ N₀.
    const double decay = N >= cert.N0 ? cert.gamma * std::pow(cert.rho_gamma, N - cert.N0) : kInf;

    d.omega_1 = sQ * (d.terminal_coeff * aN + d.G_N);
    const double terminal = aN == 0.0 ? 0.0 : 0.5 * d.terminal_coeff * std::sqrt(sQ * aN * decay);
    d.omega_half = std::sqrt(sQ * (cert.L_Vhat - 1.0) * d.G_N) + terminal;
    d.eta_N = d.eta_coeff == 0.0 ? 0.0 : d.eta_coeff * decay;
    const double sh = std::sqrt(d.h);
    d.xi_N = d.h == 0.0 ? 0.0 : d.omega_1 * d.h + 2.0 * d.omega_half * sh;
    d.margin = 1.0 - d.xi_N - d.eta_N;
    return d;
}

SufficientConditions sufficient_conditions(const StabilityCertificate& cert, const DecreaseCertificate& dec) {
    SufficientConditions s;
    const double c = dec.eta_coeff * cert.gamma;
    s.min_horizon = c > 0.0 ? cert.N0 + std::log(c) / std::log(1.0 / cert.rho_gamma) : -kInf;
    s.horizon_ok = dec.N >= cert.N0 && dec.N > s.min_horizon;
    if (!(dec.eta_N < 1.0)) {
        s.h_threshold = 0.0;
    } else {
        // positive root of ω₁h + 2ω_½√h = 1 − η_N, written without cancellation
        const double slack = 1.0 - dec.eta_N;
        const double denom = dec.omega_half + std::sqrt(dec.omega_half * dec.omega_half + dec.omega_1 * slack);
        if (denom == 0.0) {
            s.h_threshold = kInf;
        } else {
            const double root = slack / denom;
            s.h_threshold = root * root;
        }
    }
    s.mismatch_ok = dec.h < s.h_threshold;
    return s;
}

PerformanceBound performance_bound(const ValueGapBound& vg, const DecreaseCertificate& dec, double v_inf) {
    if (!(v_inf >= 0.0)) {
        fail(ErrorKind::InvalidInput, "performance_bound: v_inf must be nonnegative");
    }
    PerformanceBound p;
    p.alpha_N = vg.alpha_N;
    p.beta_N = vg.beta_N;
    p.xi_N = dec.xi_N;
    p.eta_N = dec.eta_N;
    p.margin = dec.margin;
    p.v_inf = v_inf;
    p.stable = dec.margin > 0.0;
    p.j_bound = p.stable ? ((1.0 + vg.alpha_N) * v_inf + vg.beta_N) / dec.margin : kInf;
    return p;
}

std::vector<Budget> default_budget_grid() {
    std::vector<double> axis;
    for (int i = 0; i < 13; ++i) {
        axis.push_back(std::pow(10.0, -3.0 + 0.5 * i));
    }
    std::vector<Budget> grid;
    grid.reserve(axis.size() * axis.size() * axis.size());
    for (double p1 : axis) {
        for (double p2 : axis) {
            for (double p3 : axis) {
                grid.push_back({p1, p2, p3});
            }
        }
    }
    return grid;
}

BudgetChoice optimize_budget(const ValueGapTerms& terms, const DecreaseCertificate& dec, double v_inf,
                             const std::vector<Budget>& grid) {
    if (grid.empty()) {
        fail(ErrorKind::InvalidInput, "optimize_budget: empty budget grid");
    }
    std::optional<ValueGapBound> best;
    double best_num = kInf;
    for (const auto& b : grid) {
        auto vg = apply_budget(terms, b);
        const double num = (1.0 + vg.alpha_N) * v_inf + vg.beta_N;
        if (!best || num < best_num) {
            best_num = num;
            best = vg;
        }
    }
    return {*best, performance_bound(*best, dec, v_inf)};
}

CertificateBundle certify(const LinearSystem& model, const CostWeights& W, const InputPolytope& U,
                          const UncertaintySpec& spec, int N, const Vector& x0, double v_inf,
                          const CertifyOptions& options) {
    require_horizon(N);
    CertificateBundle out;
    out.N = N;
    out.norms = model_norms(model, W, N);
    out.extremes = input_set_extremes(U);
    out.propagators =
        mismatch_propagators(model, spec, N, W.q_extremes().sigma_max, out.norms.Gamma_norm, out.norms.Phi_norm);
    const double M = options.M_Vhat ? *options.M_Vhat : MpcController(model, W, U, N).solve(x0).value;
    out.stability = stability_certificate(model, W, U, M);

    std::optional<Matrix> K_hat = options.K_hat;
    if (options.mode == BoundMode::Extension && !K_hat) {
        K_hat = out.stability.gain.K;
    }
    out.decrease = decrease_certificate(out.stability, model, W, spec, N, options.mode, K_hat);
    out.conditions = sufficient_conditions(out.stability, out.decrease);

    const auto terms = value_gap_terms(out.propagators, out.norms, W, out.extremes, x0);
    if (options.budget == BudgetPolicy::Optimize) {
        auto choice = optimize_budget(terms, out.decrease, v_inf, default_budget_grid());
        out.value_gap = choice.value_gap;
        out.performance = choice.bound;
    } else {
        out.value_gap = apply_budget(terms, Budget{});
        out.performance = performance_bound(out.value_gap, out.decrease, v_inf);
    }
    return out;
}

namespace {

nlohmann::json num(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return v;
}

} // namespace

std::string certificate_json(const CertificateBundle& b) {
    nlohmann::ordered_json j;
    j["N"] = b.N;
    j["mode"] = to_string(b.decrease.mode);
    j["g_bar_x"] = num(b.propagators.gbar_x);
    j["g_bar_u"] = num(b.propagators.gbar_u);
    j["theta_u"] = num(b.propagators.theta_u);
    j["theta_xu"] = num(b.propagators.theta_xu);
    j["u_bar"] = num(b.extremes.u_bar);
    j["d_bar_u"] = num(b.extremes.d_bar_u);
    j["sigma_min_H_hat"] = num(b.norms.H_sigma_min);
    j["Delta_du"] = num(b.value_gap.terms.Delta_du);
    j["Delta_psi"] = num(b.value_gap.terms.Delta_psi);
    j["E_psi"] = num(b.value_gap.terms.E_psi);
    j["E_u"] = num(b.value_gap.terms.E_u);
    j["E_psi_u"] = num(b.value_gap.terms.E_psi_u);
    j["p1"] = b.value_gap.budget.p1;
    j["p2"] = b.value_gap.budget.p2;
    j["p3"] = b.value_gap.budget.p3;
    j["alpha_N"] = num(b.value_gap.alpha_N);
    j["beta_N"] = num(b.value_gap.beta_N);
    j["lambda_K"] = num(b.stability.gain.lambda_K);
    j["rho_K"] = num(b.stability.gain.rho_K);
    j["C_star_K"] = num(b.stability.gain.C_star_K);
    j["eps_K"] = num(b.stability.eps_K);
    j["gamma"] = num(b.stability.gamma);
    j["rho_gamma"] = num(b.stability.rho_gamma);
    j["N0"] = b.stability.N0;
    j["L_Vhat"] = num(b.stability.L_Vhat);
    j["M_Vhat"] = num(b.stability.M_Vhat);
    j["h"] = num(b.decrease.h);
    j["G_N"] = num(b.decrease.G_N);
    j["omega_1"] = num(b.decrease.omega_1);
    j["omega_half"] = num(b.decrease.omega_half);
    j["xi_N"] = num(b.decrease.xi_N);
    j["eta_N"] = num(b.decrease.eta_N);
    if (b.decrease.K_hat) {
        j["C_star_K_hat"] = num(b.decrease.K_hat->C_star_K);
        j["A_cl_hat_norm"] = num(b.decrease.K_hat->A_cl_norm);
    }
    j["margin"] = num(b.decrease.margin);
    j["min_horizon"] = num(b.conditions.min_horizon);
    j["h_threshold"] = num(b.conditions.h_threshold);
    j["v_inf"] = num(b.performance.v_inf);
    j["j_bound"] = num(b.performance.j_bound);
    j["stable"] = b.performance.stable;
    j["horizon_ok"] = b.conditions.horizon_ok;
    j["mismatch_ok"] = b.conditions.mismatch_ok;
    j["eps_K_clamped"] = b.stability.eps_clamped;
    return j.dump(2);
}

} // namespace cemppc
