#pragma once

#include "cemppc/numerics.hpp"

#include <vector>

namespace cemppc {

/// min ½ uᵀHu + bᵀu  s.t.  G u ≤ rhs
struct CondensedQp {
    Matrix H;
    Vector b;
    Matrix G;
    Vector rhs;
};

struct QpSolution {
    Vector u;
    Vector duals; // one per row of G, zero off the active set
    double objective = 0.0;
    std::vector<int> active_set; // ascending
    int iterations = 0;
};

/// Primal active-set method for strictly convex QPs, started from u = 0
/// (requires rhs ≥ 0). Ties in constraint selection go to the lowest index.
/// Throws SolverFailure when the iteration cap (10⁴ per constraint) trips.
[[nodiscard]] QpSolution qp_solve(const CondensedQp& qp);

} // namespace cemppc
