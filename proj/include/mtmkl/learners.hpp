#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>

#include "mtmkl/errors.hpp"
#include "mtmkl/kernel.hpp"
#include "mtmkl/smo.hpp"
#include "mtmkl/types.hpp"

namespace mtmkl {

/// Box-constrained soft-margin SVM with bias: max a'1 - 1/2 a'YKYa, 0 <= a <= C, a'y = 0.
struct Svm {
    double C = 1.0;
};
/// Kernel ridge regression: max 2a'y - a'(lambda I + K)a, unconstrained.
struct Krr {
    double lambda = 1.0;
};
/// Support vector data description: max a'diag(K) - a'Ka, 0 <= a <= C, a'1 = 1.
struct Svdd {
    double C = 1.0;
};
/// One-class SVM: max -a'Ka, 0 <= a <= 1/(nu l), a'1 = 1. Without `l` the
/// task's sample count is used.
struct OneClassSvm {
    double nu = 0.5;
    std::optional<int> l;
};

using LearnerKind = std::variant<Svm, Krr, Svdd, OneClassSvm>;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

inline std::string learner_name(const LearnerKind& kind) {
    return std::visit(Overloaded{[](const Svm&) { return std::string("svm"); },
                                 [](const Krr&) { return std::string("krr"); },
                                 [](const Svdd&) { return std::string("svdd"); },
                                 [](const OneClassSvm&) { return std::string("ocsvm"); }},
                      kind);
}

inline bool needs_labels(const LearnerKind& kind) {
    return std::holds_alternative<Svm>(kind) || std::holds_alternative<Krr>(kind);
}

inline void validate(const LearnerKind& kind) {
    std::visit(Overloaded{[](const Svm& k) { detail::require(k.C > 0.0, "SVM C must be > 0"); },
                          [](const Krr& k) { detail::require(k.lambda > 0.0, "KRR lambda must be > 0"); },
                          [](const Svdd& k) { detail::require(k.C > 0.0, "SVDD C must be > 0"); },
                          [](const OneClassSvm& k) {
                              detail::require(k.nu > 0.0 && k.nu <= 1.0, "one-class nu must lie in (0,1]");
                              detail::require(!k.l || *k.l > 0, "one-class l must be a positive integer");
                          }},
               kind);
}

/// Upper box bound on each dual variable for a task of n samples (infinite for KRR).
inline double box_bound(const LearnerKind& kind, Index n) {
    return std::visit(Overloaded{[](const Svm& k) { return k.C; },
                                 [](const Krr&) { return std::numeric_limits<double>::infinity(); },
                                 [](const Svdd& k) { return k.C; },
                                 [n](const OneClassSvm& k) {
                                     return 1.0 / (k.nu * static_cast<double>(k.l.value_or(static_cast<int>(n))));
                                 }},
                      kind);
}

namespace detail {

inline void check_labels(const LearnerKind& kind, const Vector& y, Index n) {
    if (!needs_labels(kind)) return;
    require(y.size() == n, learner_name(kind) + ": one label per sample required");
    if (std::holds_alternative<Svm>(kind)) {
        for (Index i = 0; i < n; ++i) require(y(i) == 1.0 || y(i) == -1.0, "svm: labels must be +1 or -1");
    }
}

}  // namespace detail

/// The dual objective value g(alpha, K). `y` may be empty for SVDD / one-class.
inline double dual_objective(const LearnerKind& kind, const Vector& alpha, const Matrix& K, const Vector& y = {}) {
    const Index n = alpha.size();
    detail::require(K.rows() == n && K.cols() == n, "dual_objective: dimension mismatch");
    detail::check_labels(kind, y, n);
    return std::visit(
        Overloaded{[&](const Svm&) {
                       const Vector ay = alpha.cwiseProduct(y);
                       return alpha.sum() - 0.5 * ay.dot(K * ay);
                   },
                   [&](const Krr& k) {
                       return 2.0 * alpha.dot(y) - alpha.dot(K * alpha) - k.lambda * alpha.squaredNorm();
                   },
                   [&](const Svdd&) { return alpha.dot(K.diagonal()) - alpha.dot(K * alpha); },
                   [&](const OneClassSvm&) { return -alpha.dot(K * alpha); }},
        kind);
}

struct DualResult {
    Vector alpha;
    double value = 0.0;
    /// Max KKT violation (box-constrained learners) or linear-system residual (KRR).
    double kkt_residual = 0.0;
    std::int64_t iterations = 0;
};

namespace detail {

/// Feasible start on {0 <= a <= C, a'1 = 1}: fill coordinates in order.
inline Vector simplex_box_start(Index n, double C) {
    Vector a = Vector::Zero(n);
    double remaining = 1.0;
    for (Index i = 0; i < n && remaining > 0.0; ++i) {
        a(i) = std::min(C, remaining);
        remaining -= a(i);
    }
    return a;
}

inline bool feasible_start(const Vector& a, const Vector& y, double C, double target) {
    if ((a.array() < 0.0).any() || (a.array() > C).any()) return false;
    return std::abs(a.dot(y) - target) <= 1e-10 * std::max(1.0, C * static_cast<double>(a.size()));
}

}  // namespace detail

/// Maximizes the dual for a fixed (combined) kernel matrix.
///
/// KRR is solved exactly by a Cholesky factorization of lambda I + K. The
/// box-constrained learners use the two-variable working-set solver, started
/// from `warm` when it is feasible.
inline DualResult maximize_dual(const LearnerKind& kind, const Matrix& K, const Vector& y, double tol,
                                const std::optional<Vector>& warm = std::nullopt) {
    validate(kind);
    const Index n = K.rows();
    detail::require(n > 0 && K.cols() == n, "maximize_dual: K must be square and nonempty");
    detail::require(tol > 0.0, "maximize_dual: tolerance must be positive");
    detail::check_labels(kind, y, n);

    DualResult out;
    if (const auto* krr = std::get_if<Krr>(&kind)) {
        Matrix A = K;
        A.diagonal().array() += krr->lambda;
        Eigen::LLT<Matrix> llt(A);
        if (llt.info() != Eigen::Success) {
            throw SolverError("inner", "lambda I + K is not positive definite");
        }
        out.alpha = llt.solve(y);
        out.kkt_residual = (A * out.alpha - y).cwiseAbs().maxCoeff();
        out.value = dual_objective(kind, out.alpha, K, y);
        return out;
    }

    const double C = box_bound(kind, n);
    Matrix Q;
    Vector p;
    Vector sign;
    Vector start;
    double target = 0.0;
    if (std::holds_alternative<Svm>(kind)) {
        sign = y;
        Q = y.asDiagonal() * K * y.asDiagonal();
        p = -Vector::Ones(n);
        start = Vector::Zero(n);
    } else {
        if (C * static_cast<double>(n) < 1.0 - 1e-12) {
            throw InvalidArgument(learner_name(kind) + ": infeasible box, need n * upper bound >= 1");
        }
        sign = Vector::Ones(n);
        Q = 2.0 * K;
        p = std::holds_alternative<Svdd>(kind) ? Vector(-K.diagonal()) : Vector(Vector::Zero(n));
        start = detail::simplex_box_start(n, C);
        target = 1.0;
    }
    if (warm && warm->size() == n && detail::feasible_start(*warm, sign, C, target)) start = *warm;

    auto res = solve_smo(Q, p, sign, C, std::move(start), tol);
    out.alpha = std::move(res.alpha);
    out.kkt_residual = res.violation;
    out.iterations = res.iterations;
    out.value = dual_objective(kind, out.alpha, K, y);
    return out;
}

/// Per-task maximizers at the current kernel weights.
struct DualSolution {
    std::vector<Vector> alphas;
    Vector objective_values;
    Vector kkt_residual;

    double total() const { return objective_values.sum(); }
};

/// sum_t g(alpha^t, sum_m theta_m^t K_m^t) = sum_t (c^t . theta^t + d^t) for fixed alpha.
/// Row t of `c` holds the M coefficients of task t.
struct LinearizedObjective {
    Matrix c;
    Vector d;

    double value(const Matrix& theta) const { return c.cwiseProduct(theta).sum() + d.sum(); }
};

/// Coefficients of the dual objective as an affine function of the kernel weights.
inline LinearizedObjective linearize(const LearnerKind& kind, const std::vector<Vector>& alphas, const KernelBank& bank,
                                     const std::vector<Vector>& labels) {
    const std::size_t T = bank.num_tasks();
    const std::size_t M = bank.num_kernels();
    detail::require(alphas.size() == T, "linearize: one dual vector per task required");
    if (needs_labels(kind)) detail::require(labels.size() == T, "linearize: one label vector per task required");
    LinearizedObjective lin{Matrix::Zero(static_cast<Index>(T), static_cast<Index>(M)),
                            Vector::Zero(static_cast<Index>(T))};
    for (std::size_t t = 0; t < T; ++t) {
        const Vector& a = alphas[t];
        const Index ti = static_cast<Index>(t);
        detail::require(a.size() == bank.task_size(t), "linearize: dual vector length does not match task size");
        const Vector y = needs_labels(kind) ? labels[t] : Vector();
        detail::check_labels(kind, y, a.size());
        for (std::size_t m = 0; m < M; ++m) {
            const Matrix& K = bank.gram(t, m);
            const Index mi = static_cast<Index>(m);
            std::visit(Overloaded{[&](const Svm&) {
                                      const Vector ay = a.cwiseProduct(y);
                                      lin.c(ti, mi) = -0.5 * ay.dot(K * ay);
                                  },
                                  [&](const Krr&) { lin.c(ti, mi) = -a.dot(K * a); },
                                  [&](const Svdd&) { lin.c(ti, mi) = a.dot(K.diagonal()) - a.dot(K * a); },
                                  [&](const OneClassSvm&) { lin.c(ti, mi) = -a.dot(K * a); }},
                       kind);
        }
        lin.d(ti) = std::visit(Overloaded{[&](const Svm&) { return a.sum(); },
                                          [&](const Krr& k) { return 2.0 * a.dot(y) - k.lambda * a.squaredNorm(); },
                                          [](const Svdd&) { return 0.0; },
                                          [](const OneClassSvm&) { return 0.0; }},
                               kind);
    }
    return lin;
}

}  // namespace mtmkl
