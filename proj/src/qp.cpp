#include "cemppc/qp.hpp"

#include "cemppc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cemppc {

QpSolution qp_solve(const CondensedQp& qp) {
    const Eigen::Index n = qp.H.rows();
    const Eigen::Index c = qp.G.rows();
    if (qp.H.cols() != n || qp.b.size() != n || (c > 0 && qp.G.cols() != n) || qp.rhs.size() != c) {
        fail(ErrorKind::InvalidInput, "qp_solve: dimension mismatch");
    }
    numerics::require_finite(qp.H, "qp H");
    numerics::require_finite(qp.b, "qp b");
    numerics::require_finite(qp.G, "qp G");
    numerics::require_finite(qp.rhs, "qp rhs");
    if (c > 0 && qp.rhs.minCoeff() < 0.0) {
        fail(ErrorKind::InvalidInput, "qp_solve: u = 0 must be feasible (rhs >= 0)");
    }
    const Eigen::LLT<Matrix> chol(qp.H);
    if (chol.info() != Eigen::Success) {
        fail(ErrorKind::InvalidInput, "qp_solve: Hessian is not positive definite");
    }

    Vector u = Vector::Zero(n);
    std::vector<int> working;
    Vector lambda;
    const long cap = 10000L * std::max<Eigen::Index>(1, c);
    // Step lengths are judged against the unconstrained minimizer's scale, so
    // far-from-origin states (large b) do not stall on rounding noise.
    const double scale = std::max(1.0, chol.solve(qp.b).lpNorm<Eigen::Infinity>());

    for (long it = 1; it <= cap; ++it) {
        const Vector g = qp.H * u + qp.b;
        const Vector hinv_g = chol.solve(g);
        Vector p;
        if (static_cast<Eigen::Index>(working.size()) == n) {
            // A vertex: the step is zero by construction, only multipliers matter.
            Matrix Aw(n, n);
            for (std::size_t k = 0; k < working.size(); ++k) {
                Aw.row(static_cast<Eigen::Index>(k)) = qp.G.row(working[k]);
            }
            lambda = Aw.transpose().partialPivLu().solve(-g);
            p = Vector::Zero(n);
        } else if (working.empty()) {
            p = -hinv_g;
            lambda.resize(0);
        } else {
            Matrix Aw(static_cast<Eigen::Index>(working.size()), n);
            for (std::size_t k = 0; k < working.size(); ++k) {
                Aw.row(static_cast<Eigen::Index>(k)) = qp.G.row(working[k]);
            }
            const Matrix hinv_awt = chol.solve(Aw.transpose());
            const Matrix S = Aw * hinv_awt;
            lambda = S.ldlt().solve(-(Aw * hinv_g));
            p = -hinv_g - hinv_awt * lambda;
        }

        const double step_tol = 1e-11 * std::max(scale, u.lpNorm<Eigen::Infinity>());
        if (p.lpNorm<Eigen::Infinity>() <= step_tol) {
            // Stationary on the working set: optimal unless some multiplier is negative.
            int drop = -1;
            double most_negative = -1e-12 * std::max(1.0, g.lpNorm<Eigen::Infinity>());
            for (std::size_t k = 0; k < working.size(); ++k) {
                const double l = lambda(static_cast<Eigen::Index>(k));
                if (l < most_negative || (drop >= 0 && l == most_negative && working[k] < working[static_cast<std::size_t>(drop)])) {
                    most_negative = l;
                    drop = static_cast<int>(k);
                }
            }
            if (drop < 0) {
                QpSolution sol;
                sol.duals = Vector::Zero(c);
                for (std::size_t k = 0; k < working.size(); ++k) {
                    sol.duals(working[k]) = std::max(0.0, lambda(static_cast<Eigen::Index>(k)));
                }
                sol.objective = 0.5 * u.dot(qp.H * u) + qp.b.dot(u);
                sol.active_set = working;
                std::sort(sol.active_set.begin(), sol.active_set.end());
                sol.iterations = static_cast<int>(it);
                sol.u = std::move(u);
                return sol;
            }
            working.erase(working.begin() + drop);
            continue;
        }

        double alpha = 1.0;
        int blocking = -1;
        for (Eigen::Index i = 0; i < c; ++i) {
            if (std::find(working.begin(), working.end(), static_cast<int>(i)) != working.end()) {
                continue;
            }
            const double gp = qp.G.row(i).dot(p);
            if (gp <= 0.0) {
                continue;
            }
            const double t = std::max(0.0, (qp.rhs(i) - qp.G.row(i).dot(u)) / gp);
            if (t < alpha) {
                alpha = t;
                blocking = static_cast<int>(i);
            }
        }
        u += alpha * p;
        if (blocking >= 0) {
            working.push_back(blocking);
        }
    }
    fail(ErrorKind::SolverFailure, "qp_solve: iteration cap reached (" + std::to_string(cap) + ")");
}

} // namespace cemppc
