#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "mtmkl/errors.hpp"
#include "mtmkl/types.hpp"

namespace mtmkl {

struct SmoResult {
    Vector alpha;
    Vector gradient;
    /// m(alpha) - M(alpha): the largest KKT violation over index pairs.
    double violation = 0.0;
    std::int64_t iterations = 0;
};

/// Maximal KKT violation of `alpha` for
///   min 1/2 a'Qa + p'a   s.t.  y'a = const,  0 <= a <= C
/// given the gradient Qa + p.
inline double kkt_violation(const Vector& alpha, const Vector& gradient, const Vector& y, double C) {
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < alpha.size(); ++t) {
        const double v = -y(t) * gradient(t);
        const bool below_upper = alpha(t) < C;
        const bool above_lower = alpha(t) > 0.0;
        if ((y(t) > 0 && below_upper) || (y(t) < 0 && above_lower)) up = std::max(up, v);
        if ((y(t) < 0 && below_upper) || (y(t) > 0 && above_lower)) low = std::min(low, v);
    }
    if (!std::isfinite(up) || !std::isfinite(low)) return 0.0;
    return std::max(0.0, up - low);
}

/// Two-variable working-set ascent for
///   min 1/2 a'Qa + p'a   s.t.  y'a = y'a0,  0 <= a <= C,   y in {-1,+1}^n.
///
/// Q must be PSD; a pair with negative curvature is reported as a solver error.
/// `alpha0` must be feasible. Each step takes the maximal violating pair.
inline SmoResult solve_smo(const Matrix& Q, const Vector& p, const Vector& y, double C, Vector alpha0, double tol,
                           std::int64_t max_iter = -1) {
    const Index n = Q.rows();
    detail::require(Q.cols() == n && p.size() == n && y.size() == n && alpha0.size() == n,
                    "solve_smo: dimension mismatch");
    detail::require(C > 0.0, "solve_smo: box bound must be positive");
    detail::require(tol > 0.0, "solve_smo: tolerance must be positive");
    if (max_iter < 0) max_iter = std::max<std::int64_t>(100000 * static_cast<std::int64_t>(n), 100000);

    constexpr double tau = 1e-12;
    SmoResult res;
    res.alpha = std::move(alpha0);
    Vector& a = res.alpha;
    Vector& G = res.gradient;
    G = Q * a + p;
    const Vector QD = Q.diagonal();
    const double curvature_floor = -1e-8 * std::max(1.0, QD.cwiseAbs().maxCoeff());

    while (true) {
        Index i = -1, j = -1;
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        for (Index t = 0; t < n; ++t) {
            const double v = -y(t) * G(t);
            const bool below_upper = a(t) < C;
            const bool above_lower = a(t) > 0.0;
            if (((y(t) > 0 && below_upper) || (y(t) < 0 && above_lower)) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (((y(t) < 0 && below_upper) || (y(t) > 0 && above_lower)) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        res.violation = (i < 0 || j < 0) ? 0.0 : std::max(0.0, gmax - gmin);
        if (res.violation <= tol) break;
        if (res.iterations >= max_iter) {
            throw SolverError("inner", "working-set solver hit its iteration cap (" + std::to_string(max_iter) +
                                           "), violation " + std::to_string(res.violation));
        }
        ++res.iterations;

        const double old_ai = a(i);
        const double old_aj = a(j);
        if (y(i) != y(j)) {
            double quad = QD(i) + QD(j) + 2.0 * Q(i, j);
            if (quad < curvature_floor) throw SolverError("inner", "kernel matrix is not positive semidefinite");
            if (quad <= 0.0) quad = tau;
            const double delta = (-G(i) - G(j)) / quad;
            const double diff = a(i) - a(j);
            a(i) += delta;
            a(j) += delta;
            if (diff > 0.0) {
                if (a(j) < 0.0) {
                    a(j) = 0.0;
                    a(i) = diff;
                }
            } else if (a(i) < 0.0) {
                a(i) = 0.0;
                a(j) = -diff;
            }
            if (diff > 0.0) {
                if (a(i) > C) {
                    a(i) = C;
                    a(j) = C - diff;
                }
            } else if (a(j) > C) {
                a(j) = C;
                a(i) = C + diff;
            }
        } else {
            double quad = QD(i) + QD(j) - 2.0 * Q(i, j);
            if (quad < curvature_floor) throw SolverError("inner", "kernel matrix is not positive semidefinite");
            if (quad <= 0.0) quad = tau;
            const double delta = (G(i) - G(j)) / quad;
            const double sum = a(i) + a(j);
            a(i) -= delta;
            a(j) += delta;
            if (sum > C) {
                if (a(i) > C) {
                    a(i) = C;
                    a(j) = sum - C;
                }
            } else if (a(j) < 0.0) {
                a(j) = 0.0;
                a(i) = sum;
            }
            if (sum > C) {
                if (a(j) > C) {
                    a(j) = C;
                    a(i) = sum - C;
                }
            } else if (a(i) < 0.0) {
                a(i) = 0.0;
                a(j) = sum;
            }
        }
        const double di = a(i) - old_ai;
        const double dj = a(j) - old_aj;
        G.noalias() += Q.col(i) * di + Q.col(j) * dj;
    }
    return res;
}

}  // namespace mtmkl
