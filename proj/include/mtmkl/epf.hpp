#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include "mtmkl/errors.hpp"
#include "mtmkl/kernel.hpp"
#include "mtmkl/learners.hpp"
#include "mtmkl/model.hpp"
#include "mtmkl/theta.hpp"
#include "mtmkl/types.hpp"

namespace mtmkl {

struct SolverConfig {
    double nu = 2.0;
    /// Active-set threshold; kept for completeness, unused since every learner is concave.
    double eta = 1e-3;
    double eps0 = 0.1;
    double beta = 0.5;
    double sigma = 0.1;
    double tol_rel = 1e-4;
    /// Stop when |G_k| <= tol_gap (1 + |P_k|).
    double tol_gap = 1e-7;
    double tol_inner = 1e-6;
    int max_outer = 200;
    int max_backtracks = 30;
    std::uint64_t seed = 0;
    /// false: fixed step eps0 at every iteration.
    bool line_search = true;
    bool random_init = false;
    /// Worker threads for the per-task inner solves.
    int threads = 1;

    void validate() const {
        detail::require(nu > 1.0, "nu must be > 1");
        detail::require(eta > 0.0, "eta must be > 0");
        detail::require(eps0 > 0.0 && eps0 <= 1.0, "eps0 must lie in (0,1]");
        detail::require(beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
        detail::require(sigma > 0.0 && sigma < 1.0, "sigma must lie in (0,1)");
        detail::require(tol_rel > 0.0, "tol_rel must be > 0");
        detail::require(tol_gap >= 0.0, "tol_gap must be >= 0");
        detail::require(tol_inner > 0.0, "tol_inner must be > 0");
        detail::require(max_outer >= 1, "max_outer must be >= 1");
        detail::require(max_backtracks >= 0, "max_backtracks must be >= 0");
        detail::require(threads >= 1, "threads must be >= 1");
    }
};

/// State of iteration k and the step taken from it.
struct IterationRecord {
    int iteration = 0;
    double omega = 0.0;
    double value = 0.0;  // V(theta_k)
    double penalty = 0.0;  // P(x_k)
    double gap = 0.0;  // G_k
    double epsilon = 0.0;  // 0 on the final record
    int backtracks = 0;
    double step_norm = 0.0;  // ||theta_{k+1} - theta_k||
    double nu = 0.0;
    Matrix theta;
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    bool converged = false;
    bool hit_iteration_cap = false;
    bool line_search_stalled = false;
    bool nu_raised = false;

    void write_csv(std::ostream& os) const {
        os << "iteration,omega,V,P,G,epsilon,backtracks,step_norm,nu\n";
        os << std::setprecision(17);
        for (const auto& r : records) {
            os << r.iteration << ',' << r.omega << ',' << r.value << ',' << r.penalty << ',' << r.gap << ','
               << r.epsilon << ',' << r.backtracks << ',' << r.step_norm << ',' << r.nu << '\n';
        }
    }
};

/// Everything the driver needs about the training problem.
struct Problem {
    const KernelBank& bank;
    const std::vector<TaskData>& tasks;
    LearnerKind kind;
};

namespace detail {

/// Runs f(t) for t in [0, n) on up to `threads` workers; rethrows the first failure.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t t = 0; t < n; ++t) f(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t t = next++; t < n; t = next++) {
                try {
                    f(t);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline std::vector<Vector> task_labels(const Problem& pb) {
    std::vector<Vector> y;
    for (const auto& t : pb.tasks) y.push_back(needs_labels(pb.kind) ? t.labels : Vector());
    return y;
}

}  // namespace detail

/// V(theta) = sum_t max_alpha g(alpha, K_theta^t), with the maximizers.
inline std::pair<double, DualSolution> inner_value(const Matrix& theta, const Problem& pb, double tol,
                                                   const DualSolution* warm = nullptr, int threads = 1) {
    const std::size_t T = pb.bank.num_tasks();
    detail::require(theta.rows() == static_cast<Index>(T) && theta.cols() == static_cast<Index>(pb.bank.num_kernels()),
                    "inner_value: theta must be tasks x kernels");
    detail::require(pb.tasks.size() == T, "inner_value: one task per bank row required");
    DualSolution sol;
    sol.alphas.resize(T);
    sol.objective_values.resize(static_cast<Index>(T));
    sol.kkt_residual.resize(static_cast<Index>(T));
    detail::parallel_for(T, threads, [&](std::size_t t) {
        const Matrix K = combine(pb.bank, t, theta.row(static_cast<Index>(t)).transpose());
        std::optional<Vector> start;
        if (warm && warm->alphas.size() == T) start = warm->alphas[t];
        const Vector y = needs_labels(pb.kind) ? pb.tasks[t].labels : Vector();
        auto r = maximize_dual(pb.kind, K, y, tol, start);
        sol.alphas[t] = std::move(r.alpha);
        sol.objective_values(static_cast<Index>(t)) = r.value;
        sol.kkt_residual(static_cast<Index>(t)) = r.kkt_residual;
    });
    return {sol.total(), std::move(sol)};
}

/// P(x) = omega + nu (V - omega)_+.
inline double epf_value(double omega, double V, double nu) { return omega + nu * std::max(0.0, V - omega); }

/// (theta_hat, omega_hat): theta_hat minimizes the linearization over the
/// region and omega_hat = c.theta_hat + sum d.
inline ThetaState descent_direction(const ThetaState& state, const LinearizedObjective& lin,
                                    const FeasibleRegion& region) {
    ThetaState hat = solve_region(lin, region);
    // Rounding in the closed form must not turn the direction uphill.
    if (lin.value(hat.theta) > lin.value(state.theta)) {
        hat = state;
    }
    hat.omega = lin.value(hat.theta);
    return hat;
}

/// G_k from the affine constraint values h = c.theta + sum d at x_k and x_hat.
inline double directional_derivative(double omega, double h, double omega_hat, double h_hat, double nu) {
    return omega_hat + nu * std::max(0.0, h_hat - omega_hat) - omega - nu * std::max(0.0, h - omega);
}

inline double directional_derivative(double omega, const Matrix& theta, double omega_hat, const Matrix& theta_hat,
                                     const LinearizedObjective& lin, double nu) {
    return directional_derivative(omega, lin.value(theta), omega_hat, lin.value(theta_hat), nu);
}

struct LineSearchResult {
    double epsilon = 0.0;
    int backtracks = 0;
    double penalty = 0.0;  // P at the accepted point
    bool accepted = false;
};

/// Largest eps in {eps0, eps0 beta, eps0 beta^2, ...} with
/// (P(x + eps d) - P(x)) / (eps G) >= sigma. `penalty_at(eps)` evaluates P exactly.
inline LineSearchResult line_search(double P0, double G, const SolverConfig& cfg,
                                    const std::function<double(double)>& penalty_at) {
    detail::require(G < 0.0, "line_search: directional derivative must be negative");
    LineSearchResult r;
    double eps = cfg.eps0;
    for (int j = 0; j <= cfg.max_backtracks; ++j, eps *= cfg.beta) {
        const double P = penalty_at(eps);
        r.backtracks = j;
        if ((P - P0) / (eps * G) >= cfg.sigma) {
            r.epsilon = eps;
            r.penalty = P;
            r.accepted = true;
            return r;
        }
    }
    return r;
}

struct FitResult {
    TrainedModel model;
    IterationTrace trace;
    ThetaState state;
    DualSolution duals;
};

/// Exact-penalty descent on (omega, theta).
///
/// Each iteration linearizes the dual objectives at the current maximizers,
/// takes the closed-form minimizer over the region as the target point and
/// moves toward it with a backtracking step. Stops when the full step in theta
/// and |G| are both below tol_rel (relative) and the penalty term has vanished,
/// when |G| is below tol_gap, when the line search stalls, or at max_outer.
/// If the step settles while omega still trails V, nu is raised tenfold once
/// and the cap doubles.
inline FitResult fit(const std::vector<TaskData>& tasks, const KernelBank& bank, const LearnerKind& kind,
                     const FeasibleRegion& region, const SolverConfig& cfg) {
    cfg.validate();
    validate(kind);
    validate(region);
    detail::require(!tasks.empty() && tasks.size() == bank.num_tasks(), "fit: one task per bank row required");
    const Index dim = tasks.front().dim();
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        detail::require(tasks[t].size() == bank.task_size(t), "fit: task size does not match its gram matrices");
        detail::require(tasks[t].dim() == dim, "fit: all tasks must share the feature dimension");
    }
    const Problem pb{bank, tasks, kind};
    const auto labels = detail::task_labels(pb);
    const auto T = static_cast<Index>(bank.num_tasks());
    const auto M = static_cast<Index>(bank.num_kernels());

    FitResult out;
    IterationTrace& trace = out.trace;
    ThetaState state = initial_state(region, T, M, cfg.random_init ? std::optional<std::uint64_t>(cfg.seed) : std::nullopt);
    auto [V, duals] = inner_value(state.theta, pb, cfg.tol_inner, nullptr, cfg.threads);
    state.omega = V;
    double nu = cfg.nu;

    for (int k = 0;; ++k) {
        const LinearizedObjective lin = linearize(kind, duals.alphas, bank, labels);
        const ThetaState hat = descent_direction(state, lin, region);
        const double h = lin.value(state.theta);
        double G = directional_derivative(state.omega, h, hat.omega, lin.value(hat.theta), nu);
        double P = epf_value(state.omega, V, nu);

        IterationRecord rec;
        rec.iteration = k;
        rec.omega = state.omega;
        rec.value = V;
        rec.penalty = P;
        rec.gap = G;
        rec.nu = nu;
        rec.theta = state.theta;

        const double rel = (hat.theta - state.theta).norm() / std::max(1.0, state.theta.norm());
        const bool exact = V - state.omega <= 1e-6 * (1.0 + std::abs(state.omega));
        const bool settled = rel <= cfg.tol_rel && std::abs(G) <= cfg.tol_rel * (1.0 + std::abs(P));
        const bool small_gap = std::abs(G) <= cfg.tol_gap * (1.0 + std::abs(P));
        if (G >= 0.0 || small_gap || (settled && exact)) {
            trace.records.push_back(rec);
            trace.converged = true;
            break;
        }
        if (settled && !exact && !trace.nu_raised) {
            // The step has settled but omega still trails V: strengthen the penalty once.
            nu *= 10.0;
            trace.nu_raised = true;
            G = directional_derivative(state.omega, h, hat.omega, lin.value(hat.theta), nu);
            P = epf_value(state.omega, V, nu);
            rec.penalty = P;
            rec.gap = G;
            rec.nu = nu;
        }
        if (k + 1 >= cfg.max_outer * (trace.nu_raised ? 2 : 1)) {
            trace.records.push_back(rec);
            trace.hit_iteration_cap = true;
            break;
        }

        DualSolution trial_duals;
        double trial_V = 0.0;
        double trial_eps = -1.0;
        const auto evaluate = [&](double eps) {
            const ThetaState x = convex_step(state, hat, eps);
            auto [v, d] = inner_value(x.theta, pb, cfg.tol_inner, &duals, cfg.threads);
            trial_V = v;
            trial_duals = std::move(d);
            trial_eps = eps;
            return epf_value(x.omega, v, nu);
        };

        double eps = cfg.eps0;
        if (cfg.line_search) {
            const auto ls = line_search(P, G, cfg, evaluate);
            if (!ls.accepted) {
                trace.records.push_back(rec);
                trace.line_search_stalled = true;
                trace.converged = true;
                break;
            }
            eps = ls.epsilon;
            rec.backtracks = ls.backtracks;
        } else {
            evaluate(eps);
        }
        if (trial_eps != eps) evaluate(eps);

        ThetaState next = convex_step(state, hat, eps);
        rec.epsilon = eps;
        rec.step_norm = (next.theta - state.theta).norm();
        trace.records.push_back(std::move(rec));
        state = std::move(next);
        V = trial_V;
        duals = std::move(trial_duals);
    }

    // Final maximizers at the final weights.
    std::tie(V, duals) = inner_value(state.theta, pb, cfg.tol_inner, &duals, cfg.threads);

    TrainedModel& m = out.model;
    m.kernels = bank.specs();
    m.region = region;
    m.learner = kind;
    m.dim = dim;
    m.theta = state.theta;
    m.zeta = state.zeta;
    m.gamma = state.gamma;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const Matrix K = combine(bank, t, state.theta.row(static_cast<Index>(t)).transpose());
        m.tasks.push_back(make_task_model(kind, tasks[t], K, duals.alphas[t]));
    }
    m.info.iterations = static_cast<int>(trace.records.size()) - 1;
    m.info.final_value = V;
    m.info.final_omega = state.omega;
    m.info.final_penalty = epf_value(state.omega, V, nu);
    m.info.nu = nu;
    m.info.converged = trace.converged;
    m.info.hit_iteration_cap = trace.hit_iteration_cap;
    m.info.line_search_stalled = trace.line_search_stalled;
    out.state = std::move(state);
    out.duals = std::move(duals);
    return out;
}

}  // namespace mtmkl
