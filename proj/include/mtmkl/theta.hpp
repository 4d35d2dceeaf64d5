#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>

#include "mtmkl/errors.hpp"
#include "mtmkl/learners.hpp"
#include "mtmkl/types.hpp"

namespace mtmkl {

/// {theta >= 0, ||theta||_p <= radius} over all T x M weights as one vector.
struct LpBall {
    double p = 2.0;
    double radius = 1.0;
};
/// {theta >= 0, (sum_t ||theta^t||_p^q)^(1/q) <= radius}; rows of theta are the groups.
struct LpLq {
    double p = 2.0;
    double q = 1.0;
    double radius = 1.0;
};
/// Common space: theta^t = zeta for every task, ||zeta||_p <= 1.
struct CommonSpace {
    double p = 2.0;
};
/// Independent spaces: ||theta^t||_p <= 1 for every task.
struct IndependentSpace {
    double p = 2.0;
};
/// Partially shared common space: theta^t = zeta + gamma^t with
/// ||zeta||_p <= zeta_radius and (sum_t ||gamma^t||_p^q)^(1/q) <= gamma_radius.
struct PartiallyShared {
    double p = 2.0;
    double q = 1.0;
    double zeta_radius = 1.0;
    double gamma_radius = 1.0;
};

using FeasibleRegion = std::variant<LpBall, LpLq, CommonSpace, IndependentSpace, PartiallyShared>;

inline std::string region_name(const FeasibleRegion& r) {
    return std::visit(Overloaded{[](const LpBall&) { return std::string("lp"); },
                                 [](const LpLq&) { return std::string("lplq"); },
                                 [](const CommonSpace&) { return std::string("cs"); },
                                 [](const IndependentSpace&) { return std::string("is"); },
                                 [](const PartiallyShared&) { return std::string("pscs"); }},
                      r);
}

inline void validate(const FeasibleRegion& region) {
    const auto exponent = [](double v, const char* name) {
        detail::require(std::isfinite(v) && v >= 1.0, std::string(name) + " must be >= 1");
    };
    std::visit(Overloaded{[&](const LpBall& r) {
                              exponent(r.p, "p");
                              detail::require(r.radius > 0.0, "radius must be > 0");
                          },
                          [&](const LpLq& r) {
                              exponent(r.p, "p");
                              exponent(r.q, "q");
                              detail::require(r.radius > 0.0, "radius must be > 0");
                          },
                          [&](const CommonSpace& r) { exponent(r.p, "p"); },
                          [&](const IndependentSpace& r) { exponent(r.p, "p"); },
                          [&](const PartiallyShared& r) {
                              exponent(r.p, "p");
                              exponent(r.q, "q");
                              detail::require(r.zeta_radius > 0.0, "zeta radius must be > 0");
                              detail::require(r.gamma_radius >= 0.0, "gamma radius must be >= 0");
                          }},
               region);
}

/// Current kernel weights. `theta` is T x M; zeta / gamma are kept for the
/// regions that are parametrized by them.
struct ThetaState {
    Matrix theta;
    std::optional<Vector> zeta;
    std::optional<Matrix> gamma;
    double omega = 0.0;
};

namespace detail {

/// Exponents within 1e-9 of one are treated as exactly one.
inline bool is_unit_exponent(double p) { return std::abs(p - 1.0) <= 1e-9; }

inline double lp_norm(const Eigen::Ref<const Vector>& v, double p) {
    const double scale = v.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    if (is_unit_exponent(p)) return v.cwiseAbs().sum();
    return scale * std::pow((v.cwiseAbs() / scale).array().pow(p).sum(), 1.0 / p);
}

struct GroupDirection {
    Vector unit;  // ||unit||_p = 1, or zero when the group has no negative coefficient
    double dual_norm = 0.0;  // -c . unit
};

/// Minimizer of c.u over {u >= 0, ||u||_p <= 1}.
inline GroupDirection group_direction(const Eigen::Ref<const Vector>& c, double p) {
    GroupDirection g{Vector::Zero(c.size()), 0.0};
    const Vector neg = (-c).cwiseMax(0.0);
    const double scale = neg.size() > 0 ? neg.maxCoeff() : 0.0;
    if (!(scale > 0.0)) return g;
    if (is_unit_exponent(p)) {
        Index j = 0;
        c.minCoeff(&j);  // first minimal index
        g.unit(j) = 1.0;
        g.dual_norm = -c(j);
        return g;
    }
    const double r = 1.0 / (p - 1.0);
    const Vector w = (neg / scale).array().pow(r).matrix();
    g.unit = w / lp_norm(w, p);
    g.dual_norm = scale * std::pow((neg / scale).array().pow(r + 1.0).sum(), 1.0 / (r + 1.0));
    return g;
}

inline void check_finite(const Eigen::Ref<const Matrix>& c, const char* who) {
    require(c.allFinite(), std::string(who) + ": coefficients must be finite");
}

}  // namespace detail

/// argmin c.theta over {theta >= 0, ||theta||_p <= a}.
inline Vector solve_lp_ball(const Eigen::Ref<const Vector>& c, double p, double a) {
    detail::require(std::isfinite(p) && p >= 1.0, "solve_lp_ball: p must be >= 1");
    detail::require(a > 0.0, "solve_lp_ball: radius must be > 0");
    detail::check_finite(c, "solve_lp_ball");
    return a * detail::group_direction(c, p).unit;
}

/// argmin sum_t c^t.theta^t over {theta >= 0, (sum_t ||theta^t||_p^q)^(1/q) <= a}.
/// Row t of `c` is group t.
///
/// Each group points along its own Lp minimizer; the budget split solves
/// min -sum_t sigma_t ||c~^t||_* over the nonnegative Lq ball. For q = 1 the
/// whole budget goes to the group with the LARGEST dual norm (lowest index on
/// ties); for q > 1, sigma_t is proportional to ||c~^t||_*^(1/(q-1)).
inline Matrix solve_lplq(const Eigen::Ref<const Matrix>& c, double p, double q, double a) {
    detail::require(std::isfinite(p) && p >= 1.0, "solve_lplq: p must be >= 1");
    detail::require(std::isfinite(q) && q >= 1.0, "solve_lplq: q must be >= 1");
    detail::require(a > 0.0, "solve_lplq: radius must be > 0");
    detail::require(c.rows() > 0 && c.cols() > 0, "solve_lplq: groups must be nonempty");
    detail::check_finite(c, "solve_lplq");

    const Index T = c.rows();
    std::vector<detail::GroupDirection> dirs;
    dirs.reserve(static_cast<std::size_t>(T));
    Vector dual(T);
    for (Index t = 0; t < T; ++t) {
        dirs.push_back(detail::group_direction(c.row(t).transpose(), p));
        dual(t) = dirs.back().dual_norm;
    }
    Matrix theta = Matrix::Zero(c.rows(), c.cols());
    const double top = dual.maxCoeff();
    if (!(top > 0.0)) return theta;

    if (detail::is_unit_exponent(q)) {
        Index t0 = 0;
        dual.maxCoeff(&t0);
        theta.row(t0) = a * dirs[static_cast<std::size_t>(t0)].unit.transpose();
        return theta;
    }
    const double s = 1.0 / (q - 1.0);
    const Vector rel = dual / top;
    const double denom = std::pow(rel.array().pow(s + 1.0).sum(), 1.0 / q);
    for (Index t = 0; t < T; ++t) {
        if (rel(t) == 0.0) continue;
        const double sigma = a * std::pow(rel(t), s) / denom;
        theta.row(t) = sigma * dirs[static_cast<std::size_t>(t)].unit.transpose();
    }
    return theta;
}

/// Minimizer of the linearized objective over the region. omega is left at 0.
inline ThetaState solve_region(const LinearizedObjective& lin, const FeasibleRegion& region) {
    validate(region);
    const Matrix& c = lin.c;
    const Index T = c.rows();
    const Index M = c.cols();
    detail::require(T > 0 && M > 0 && lin.d.size() == T, "solve_region: coefficient dimensions mismatch");
    ThetaState out;
    std::visit(Overloaded{[&](const LpBall& r) {
                              const Matrix ct = c.transpose();
                              const Vector flat = ct.reshaped();
                              const Vector sol = solve_lp_ball(flat, r.p, r.radius);
                              out.theta = sol.reshaped(M, T).transpose();
                          },
                          [&](const LpLq& r) { out.theta = solve_lplq(c, r.p, r.q, r.radius); },
                          [&](const CommonSpace& r) {
                              const Vector zeta = solve_lp_ball(c.colwise().sum().transpose(), r.p, 1.0);
                              out.theta = zeta.transpose().replicate(T, 1);
                              out.zeta = zeta;
                          },
                          [&](const IndependentSpace& r) {
                              out.theta.resize(T, M);
                              for (Index t = 0; t < T; ++t) {
                                  out.theta.row(t) = solve_lp_ball(c.row(t).transpose(), r.p, 1.0).transpose();
                              }
                          },
                          [&](const PartiallyShared& r) {
                              // The objective separates into (sum_t c^t).zeta + sum_t c^t.gamma^t
                              // with independent constraints, so each block is solved exactly once.
                              const Vector zeta = solve_lp_ball(c.colwise().sum().transpose(), r.p, r.zeta_radius);
                              const Matrix gamma = r.gamma_radius > 0.0 ? solve_lplq(c, r.p, r.q, r.gamma_radius)
                                                                        : Matrix(Matrix::Zero(T, M));
                              out.theta = gamma.rowwise() + zeta.transpose();
                              out.zeta = zeta;
                              out.gamma = gamma;
                          }},
               region);
    return out;
}

/// Deterministic interior-to-boundary starting point: equal weights on the
/// boundary of each norm constraint, gamma = 0 for the partially shared region.
/// With a seed, positive random weights scaled onto the same boundaries.
inline ThetaState initial_state(const FeasibleRegion& region, Index T, Index M,
                                std::optional<std::uint64_t> seed = std::nullopt) {
    validate(region);
    detail::require(T > 0 && M > 0, "initial_state: need at least one task and one kernel");
    std::mt19937_64 rng(seed.value_or(0));
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    const auto draw = [&](Index rows, Index cols) {
        Matrix m(rows, cols);
        if (seed) {
            for (Index j = 0; j < cols; ++j)
                for (Index i = 0; i < rows; ++i) m(i, j) = unif(rng);
        } else {
            m.setOnes();
        }
        return m;
    };
    const auto onto_lp = [](Matrix m, double p, double radius) -> Matrix {
        const Vector flat = m.reshaped();
        return m * (radius / detail::lp_norm(flat, p));
    };
    const auto onto_lplq = [](Matrix m, double p, double q, double radius) -> Matrix {
        Vector norms(m.rows());
        for (Index t = 0; t < m.rows(); ++t) norms(t) = detail::lp_norm(m.row(t).transpose(), p);
        return m * (radius / detail::lp_norm(norms, q));
    };

    ThetaState s;
    std::visit(Overloaded{[&](const LpBall& r) { s.theta = onto_lp(draw(T, M), r.p, r.radius); },
                          [&](const LpLq& r) { s.theta = onto_lplq(draw(T, M), r.p, r.q, r.radius); },
                          [&](const CommonSpace& r) {
                              const Vector zeta = onto_lp(draw(M, 1), r.p, 1.0);
                              s.zeta = zeta;
                              s.theta = zeta.transpose().replicate(T, 1);
                          },
                          [&](const IndependentSpace& r) {
                              s.theta = draw(T, M);
                              for (Index t = 0; t < T; ++t) {
                                  s.theta.row(t) /= detail::lp_norm(s.theta.row(t).transpose(), r.p);
                              }
                          },
                          [&](const PartiallyShared& r) {
                              const Vector zeta = onto_lp(draw(M, 1), r.p, r.zeta_radius);
                              Matrix gamma = Matrix::Zero(T, M);
                              if (seed && r.gamma_radius > 0.0) gamma = onto_lplq(draw(T, M), r.p, r.q, 0.5 * r.gamma_radius);
                              s.zeta = zeta;
                              s.gamma = gamma;
                              s.theta = gamma.rowwise() + zeta.transpose();
                          }},
               region);
    return s;
}

/// Largest violation of the region's constraints by `s` (0 when feasible):
/// negativity, norm excess and broken zeta / gamma decompositions.
inline double region_violation(const ThetaState& s, const FeasibleRegion& region) {
    const Index T = s.theta.rows();
    double v = std::max(0.0, -s.theta.minCoeff());
    const auto excess = [&](double norm, double radius) { v = std::max(v, norm - radius); };
    const auto group_norms = [&](const Matrix& m, double p) {
        Vector n(m.rows());
        for (Index t = 0; t < m.rows(); ++t) n(t) = detail::lp_norm(m.row(t).transpose(), p);
        return n;
    };
    std::visit(Overloaded{[&](const LpBall& r) {
                              const Vector flat = s.theta.reshaped();
                              excess(detail::lp_norm(flat, r.p), r.radius);
                          },
                          [&](const LpLq& r) { excess(detail::lp_norm(group_norms(s.theta, r.p), r.q), r.radius); },
                          [&](const CommonSpace& r) {
                              for (Index t = 1; t < T; ++t) {
                                  v = std::max(v, (s.theta.row(t) - s.theta.row(0)).cwiseAbs().maxCoeff());
                              }
                              excess(detail::lp_norm(s.theta.row(0).transpose(), r.p), 1.0);
                          },
                          [&](const IndependentSpace& r) { excess(group_norms(s.theta, r.p).maxCoeff(), 1.0); },
                          [&](const PartiallyShared& r) {
                              if (!s.zeta || !s.gamma) {
                                  v = std::numeric_limits<double>::infinity();
                                  return;
                              }
                              v = std::max({v, -s.zeta->minCoeff(), -s.gamma->minCoeff()});
                              v = std::max(v, (s.theta - (s.gamma->rowwise() + s.zeta->transpose())).cwiseAbs().maxCoeff());
                              excess(detail::lp_norm(*s.zeta, r.p), r.zeta_radius);
                              if (r.gamma_radius > 0.0) {
                                  excess(detail::lp_norm(group_norms(*s.gamma, r.p), r.q), r.gamma_radius);
                              } else {
                                  v = std::max(v, s.gamma->cwiseAbs().maxCoeff());
                              }
                          }},
               region);
    return v;
}

/// x + eps (target - x) on every stored block. eps == 1 returns the target exactly.
inline ThetaState convex_step(const ThetaState& from, const ThetaState& to, double eps) {
    if (eps == 1.0) return to;
    ThetaState out;
    out.theta = from.theta + eps * (to.theta - from.theta);
    if (from.zeta && to.zeta) out.zeta = Vector(*from.zeta + eps * (*to.zeta - *from.zeta));
    if (from.gamma && to.gamma) out.gamma = Matrix(*from.gamma + eps * (*to.gamma - *from.gamma));
    out.omega = from.omega + eps * (to.omega - from.omega);
    return out;
}

}  // namespace mtmkl
