#include "cemppc/error.hpp"
#include "cemppc/qp.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cemppc;

namespace {

// Brute force over every active subset: the unique KKT point is the optimum.
Vector kkt_enumeration(const CondensedQp& qp) {
    const int n = static_cast<int>(qp.H.rows());
    const int c = static_cast<int>(qp.G.rows());
    double best = kInf;
    Vector best_u;
    for (int mask = 0; mask < (1 << c); ++mask) {
        std::vector<int> act;
        for (int i = 0; i < c; ++i)
            if (mask & (1 << i)) act.push_back(i);
        const int a = static_cast<int>(act.size());
        if (a > n) continue;
        Matrix K = Matrix::Zero(n + a, n + a);
        Vector r(n + a);
        K.topLeftCorner(n, n) = qp.H;
        r.head(n) = -qp.b;
        for (int k = 0; k < a; ++k) {
            K.block(0, n + k, n, 1) = qp.G.row(act[k]).transpose();
            K.block(n + k, 0, 1, n) = qp.G.row(act[k]);
            r(n + k) = qp.rhs(act[k]);
        }
        Eigen::FullPivLU<Matrix> lu(K);
        if (lu.rank() < n + a) continue;
        const Vector z = lu.solve(r);
        const Vector u = z.head(n);
        if (((qp.G * u - qp.rhs).array() > 1e-9).any()) continue;
        if (a > 0 && z.tail(a).minCoeff() < -1e-9) continue;
        const double f = 0.5 * u.dot(qp.H * u) + qp.b.dot(u);
        if (f < best) {
            best = f;
            best_u = u;
        }
    }
    return best_u;
}

} // namespace

TEST(ActiveSet, MatchesKktEnumerationOnRandomBoxes) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> width(0.05, 2.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + trial % 4;
        Matrix M(n, n);
        for (int i = 0; i < M.size(); ++i) M.data()[i] = g(rng);
        CondensedQp qp;
        qp.H = M * M.transpose() + 0.1 * Matrix::Identity(n, n);
        qp.b = Vector(n);
        for (int i = 0; i < n; ++i) qp.b(i) = 3 * g(rng);
        qp.G = Matrix::Zero(2 * n, n);
        qp.rhs = Vector(2 * n);
        for (int i = 0; i < n; ++i) {
            qp.G(2 * i, i) = 1;
            qp.G(2 * i + 1, i) = -1;
            qp.rhs(2 * i) = width(rng);
            qp.rhs(2 * i + 1) = width(rng);
        }
        const auto sol = qp_solve(qp);
        const Vector ref = kkt_enumeration(qp);
        ASSERT_EQ(ref.size(), n);
        EXPECT_LT((sol.u - ref).lpNorm<Eigen::Infinity>(), 1e-9) << "trial " << trial;
        // KKT of the returned point
        const Vector stat = qp.H * sol.u + qp.b + qp.G.transpose() * sol.duals;
        EXPECT_LT(stat.lpNorm<Eigen::Infinity>(), 1e-9);
        EXPECT_GE(sol.duals.minCoeff(), 0.0);
        EXPECT_LT(((qp.G * sol.u - qp.rhs).array() * sol.duals.array()).abs().maxCoeff(), 1e-9);
    }
}

TEST(ActiveSet, UnconstrainedMinimizer) {
    CondensedQp qp{(Matrix(2, 2) << 2, 0, 0, 4).finished(), (Vector(2) << -2, -4).finished(), Matrix(0, 2), Vector(0)};
    const auto sol = qp_solve(qp);
    EXPECT_NEAR(sol.u(0), 1.0, 1e-14);
    EXPECT_NEAR(sol.u(1), 1.0, 1e-14);
    EXPECT_TRUE(sol.active_set.empty());
}

TEST(ActiveSet, RejectsBadInput) {
    CondensedQp qp{-Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Identity(1, 1), Vector::Ones(1)};
    EXPECT_THROW((void)qp_solve(qp), Error);
    qp.H = Matrix::Identity(1, 1);
    qp.rhs(0) = -1;
    EXPECT_THROW((void)qp_solve(qp), Error);
}
