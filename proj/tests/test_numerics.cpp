#include "cemppc/error.hpp"
#include "cemppc/numerics.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <random>

using namespace cemppc;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int r, int c) {
    std::normal_distribution<double> g;
    Matrix M(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) M(i, j) = g(rng);
    return M;
}

Matrix ref_A() { return (Matrix(2, 2) << 1.0, 0.7, 0.12, 0.4).finished(); }
Matrix ref_B() { return (Matrix(2, 1) << 1.0, 1.2).finished(); }

} // namespace

TEST(Jacobi, MatchesSelfAdjointSolver) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 6;
        Matrix M = random_matrix(rng, n, n);
        M = (M + M.transpose()).eval();
        const Vector mine = numerics::symmetric_eigenvalues(M);
        Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
        for (int i = 0; i < n; ++i) EXPECT_NEAR(mine(i), es.eigenvalues()(i), 1e-10 * (1 + M.norm()));
    }
}

TEST(SpectralNorm, MatchesSvdOnRectangular) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const Matrix M = random_matrix(rng, 1 + trial % 5, 1 + (trial / 5) % 4);
        Eigen::JacobiSVD<Matrix> svd(M);
        EXPECT_NEAR(numerics::spectral_norm(M), svd.singularValues()(0), 1e-10 * (1 + M.norm()));
    }
    EXPECT_EQ(numerics::spectral_norm(Matrix::Zero(3, 2)), 0.0);
}

TEST(SpectralNorm, ReferencePlant) {
    // numpy.linalg.norm(·, 2)
    EXPECT_NEAR(numerics::spectral_norm(ref_A()), 1.2657293014158062, 1e-12);
    EXPECT_NEAR(numerics::spectral_norm(ref_B()), 1.562049935181331, 1e-12);
    EXPECT_NEAR(numerics::spectral_radius(ref_A()), 1.117133072292284, 1e-12);
}

TEST(EigExtremes, RejectsIndefiniteAndAsymmetric) {
    const Matrix indefinite = (Matrix(2, 2) << 1, 0, 0, -1).finished();
    const Matrix asym = (Matrix(2, 2) << 1, 0.5, 0, 1).finished();
    EXPECT_THROW((void)numerics::sym_eig_extremes(indefinite), Error);
    EXPECT_THROW((void)numerics::sym_eig_extremes(asym), Error);
    const auto ext = numerics::sym_eig_extremes((Matrix(2, 2) << 2, 0, 0, 8).finished());
    EXPECT_DOUBLE_EQ(ext.sigma_min, 2.0);
    EXPECT_DOUBLE_EQ(ext.sigma_max, 8.0);
    EXPECT_DOUBLE_EQ(ext.ratio, 4.0);
}

TEST(Lyapunov, ResidualAndFrozenValue) {
    const auto dare = numerics::solve_dare(ref_A(), ref_B(), 2 * Matrix::Identity(2, 2), Matrix::Identity(1, 1));
    const Matrix Acl = ref_A() + ref_B() * dare.K;
    const Matrix P = numerics::solve_dlyap(Acl);
    EXPECT_LT((P - Acl.transpose() * P * Acl - Matrix::Identity(2, 2)).norm(), 1e-12);
    // scipy.linalg.solve_discrete_lyapunov(Aclᵀ, I)
    EXPECT_NEAR(P(0, 0), 1.5350769916583396, 1e-9);
    EXPECT_NEAR(P(0, 1), 0.2249095963777813, 1e-9);
    EXPECT_NEAR(P(1, 1), 1.097996963170849, 1e-9);
}

TEST(Lyapunov, ThrowsOnUnstable) {
    try {
        (void)numerics::solve_dlyap(ref_A());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Instability);
    }
}

TEST(Dare, ReferencePlantFrozen) {
    const Matrix Q = 2 * Matrix::Identity(2, 2);
    const Matrix R = Matrix::Identity(1, 1);
    const auto sol = numerics::solve_dare(ref_A(), ref_B(), Q, R);
    // scipy.linalg.solve_discrete_are
    EXPECT_NEAR(sol.P(0, 0), 3.305557772847487, 1e-9);
    EXPECT_NEAR(sol.P(0, 1), 0.6734007347733058, 1e-9);
    EXPECT_NEAR(sol.P(1, 1), 2.408492561512958, 1e-9);
    EXPECT_NEAR(sol.K(0, 0), -0.4836309288046782, 1e-9);
    EXPECT_NEAR(sol.K(0, 1), -0.4584672251067803, 1e-9);
    EXPECT_LT(numerics::dare_residual(ref_A(), ref_B(), Q, R, sol.P), 1e-9);
    EXPECT_LT(numerics::spectral_radius(ref_A() + ref_B() * sol.K), 1.0);
}

TEST(Dare, RandomStabilizableResidual) {
    std::mt19937_64 rng(3);
    int checked = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + trial % 3;
        const Matrix A = random_matrix(rng, n, n);
        const Matrix B = random_matrix(rng, n, 1 + trial % 2);
        try {
            const auto sol = numerics::solve_dare(A, B, Matrix::Identity(n, n), Matrix::Identity(B.cols(), B.cols()));
            EXPECT_LT(numerics::dare_residual(A, B, Matrix::Identity(n, n), Matrix::Identity(B.cols(), B.cols()), sol.P),
                      1e-8 * (1 + sol.P.norm()));
            ++checked;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::NonStabilizable);
        }
    }
    EXPECT_GT(checked, 20);
}

TEST(Dare, UncontrollableUnstableMode) {
    const Matrix A = (Matrix(2, 2) << 1.5, 0, 0, 0.5).finished();
    const Matrix B = (Matrix(2, 1) << 0, 1).finished();
    try {
        (void)numerics::solve_dare(A, B, Matrix::Identity(2, 2), Matrix::Identity(1, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonStabilizable);
    }
}

TEST(BlockDiagonal, Kronecker) {
    const Matrix M = (Matrix(1, 2) << 3, 4).finished();
    const Matrix D = numerics::block_diagonal(M, 3);
    ASSERT_EQ(D.rows(), 3);
    ASSERT_EQ(D.cols(), 6);
    EXPECT_EQ(D(2, 4), 3);
    EXPECT_EQ(D(2, 5), 4);
    EXPECT_EQ(D(0, 2), 0);
}

TEST(Finite, RejectsNaN) {
    Matrix M = Matrix::Identity(2, 2);
    M(1, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(numerics::require_finite(M, "M"), Error);
}
