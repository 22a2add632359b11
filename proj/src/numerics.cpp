#include "cemppc/numerics.hpp"

#include "cemppc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cemppc::numerics {

void require_finite(const Matrix& M, std::string_view what) {
    if (!M.allFinite()) {
        fail(ErrorKind::InvalidInput, std::string(what) + " has non-finite entries");
    }
}

void require_finite(const Vector& v, std::string_view what) {
    if (!v.allFinite()) {
        fail(ErrorKind::InvalidInput, std::string(what) + " has non-finite entries");
    }
}

Vector symmetric_eigenvalues(const Matrix& S, const NumericsSettings& settings) {
    if (S.rows() != S.cols()) {
        fail(ErrorKind::InvalidInput, "symmetric_eigenvalues: matrix is not square");
    }
    require_finite(S, "symmetric_eigenvalues input");
    const Eigen::Index n = S.rows();
    Matrix a = 0.5 * (S + S.transpose());

    const double scale = a.norm();
    if (scale == 0.0) {
        return Vector::Zero(n);
    }
    const double eps = std::numeric_limits<double>::epsilon();

    for (int sweep = 0; sweep < settings.jacobi_max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                off += a(p, q) * a(p, q);
            }
        }
        if (std::sqrt(2.0 * off) <= eps * scale) {
            break;
        }
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) {
                    continue;
                }
                // Rotation that annihilates a(p,q) (Golub & Van Loan, sym.schur2).
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
            }
        }
    }

    Vector eig = a.diagonal();
    std::sort(eig.begin(), eig.end());
    return eig;
}

double spectral_norm(const Matrix& M, const NumericsSettings& settings) {
    require_finite(M, "spectral_norm input");
    if (M.size() == 0) {
        return 0.0;
    }
    const Matrix gram = M.rows() >= M.cols() ? Matrix(M.transpose() * M) : Matrix(M * M.transpose());
    const Vector eig = symmetric_eigenvalues(gram, settings);
    return std::sqrt(std::max(0.0, eig(eig.size() - 1)));
}

double spectral_radius(const Matrix& M) {
    if (M.rows() != M.cols()) {
        fail(ErrorKind::InvalidInput, "spectral_radius: matrix is not square");
    }
    require_finite(M, "spectral_radius input");
    if (M.size() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<Matrix> solver(M, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        fail(ErrorKind::SolverFailure, "spectral_radius: eigenvalue iteration did not converge");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

EigenExtremes sym_eig_extremes(const Matrix& M, const NumericsSettings& settings) {
    if (M.rows() != M.cols() || M.size() == 0) {
        fail(ErrorKind::Domain, "sym_eig_extremes: matrix must be square and non-empty");
    }
    require_finite(M, "sym_eig_extremes input");
    const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
    if (asym > settings.symmetry_tol * std::max(1.0, M.cwiseAbs().maxCoeff())) {
        fail(ErrorKind::Domain, "sym_eig_extremes: matrix is not symmetric");
    }
    const Vector eig = symmetric_eigenvalues(M, settings);
    const double lo = eig(0);
    const double hi = eig(eig.size() - 1);
    if (!(lo > 0.0)) {
        fail(ErrorKind::Domain, "sym_eig_extremes: matrix is not positive definite");
    }
    return {lo, hi, hi / lo};
}

Matrix solve_dlyap(const Matrix& A_cl) {
    if (A_cl.rows() != A_cl.cols()) {
        fail(ErrorKind::InvalidInput, "solve_dlyap: matrix is not square");
    }
    if (spectral_radius(A_cl) >= 1.0) {
        fail(ErrorKind::Instability, "solve_dlyap: closed loop is not Schur stable");
    }
    const Eigen::Index n = A_cl.rows();
    const Matrix At = A_cl.transpose();
    // vec(Aᵀ P A) = (Aᵀ ⊗ Aᵀ) vec(P) in column-major vec.
    Matrix kron(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            kron.block(i * n, j * n, n, n) = At(i, j) * At;
        }
    }
    const Matrix lhs = Matrix::Identity(n * n, n * n) - kron;
    const Matrix identity = Matrix::Identity(n, n);
    const Vector rhs = Eigen::Map<const Vector>(identity.data(), n * n);
    const Vector sol = lhs.partialPivLu().solve(rhs);
    Matrix P = Eigen::Map<const Matrix>(sol.data(), n, n);
    return 0.5 * (P + P.transpose());
}

DareSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                        const NumericsSettings& settings) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = B.cols();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m) {
        fail(ErrorKind::InvalidInput, "solve_dare: dimension mismatch");
    }
    require_finite(A, "A");
    require_finite(B, "B");
    require_finite(Q, "Q");
    require_finite(R, "R");

    Matrix P = Q;
    for (int it = 1; it <= settings.dare_max_iter; ++it) {
        const Matrix BtP = B.transpose() * P;
        const Matrix S = R + BtP * B;
        const Matrix gainTerm = S.ldlt().solve(BtP * A); // (R+BᵀPB)⁻¹BᵀPA
        Matrix next = Q + A.transpose() * P * A - (BtP * A).transpose() * gainTerm;
        next = (0.5 * (next + next.transpose())).eval();
        if (!next.allFinite()) {
            break;
        }
        const double change = (next - P).norm();
        P = std::move(next);
        if (change <= settings.dare_tol * std::max(1.0, P.norm())) {
            const Matrix BtPn = B.transpose() * P;
            Matrix K = -(R + BtPn * B).ldlt().solve(BtPn * A);
            if (spectral_radius(A + B * K) >= 1.0) {
                break;
            }
            return {std::move(P), std::move(K), it};
        }
    }
    fail(ErrorKind::NonStabilizable, "solve_dare: Riccati recursion did not converge to a stabilizing solution");
}

double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& P) {
    const Matrix BtPA = B.transpose() * P * A;
    const Matrix S = R + B.transpose() * P * B;
    return (A.transpose() * P * A - P - BtPA.transpose() * S.ldlt().solve(BtPA) + Q).norm();
}

Matrix block_diagonal(const Matrix& M, int count) {
    Matrix out = Matrix::Zero(M.rows() * count, M.cols() * count);
    for (int k = 0; k < count; ++k) {
        out.block(k * M.rows(), k * M.cols(), M.rows(), M.cols()) = M;
    }
    return out;
}

} // namespace cemppc::numerics
