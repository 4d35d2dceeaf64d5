#include <random>

#include <gtest/gtest.h>

#include "mtmkl/smo.hpp"
#include "oracles.hpp"

using namespace mtmkl;

namespace {

double objective(const Matrix& Q, const Vector& p, const Vector& a) { return 0.5 * a.dot(Q * a) + p.dot(a); }

}  // namespace

TEST(Smo, MatchesEnumerationOracleOnSvmProblems) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> size(2, 8);
    std::bernoulli_distribution coin(0.5);
    for (int rep = 0; rep < 60; ++rep) {
        const Index n = size(rng);
        const Matrix K = oracle::random_psd(n, 1 + rep % n, rng);
        Vector y(n);
        for (Index i = 0; i < n; ++i) y(i) = coin(rng) ? 1.0 : -1.0;
        y(0) = 1.0;
        y(1) = -1.0;
        const Matrix Q = y.asDiagonal() * K * y.asDiagonal();
        const Vector p = -Vector::Ones(n);
        const double C = rep % 3 == 0 ? 0.5 : 10.0;
        const SmoResult r = solve_smo(Q, p, y, C, Vector::Zero(n), 1e-9);
        const auto ref = oracle::enumerate_qp(Q, p, y, 0.0, C);
        ASSERT_TRUE(std::isfinite(ref.value));
        const double got = objective(Q, p, r.alpha);
        EXPECT_LE(got - ref.value, 1e-7 * std::max(1.0, std::abs(ref.value)));
        EXPECT_LE(r.violation, 1e-9);
        EXPECT_NEAR(y.dot(r.alpha), 0.0, 1e-10);
        EXPECT_GE(r.alpha.minCoeff(), 0.0);
        EXPECT_LE(r.alpha.maxCoeff(), C);
    }
}

TEST(Smo, GradientIsMaintained) {
    std::mt19937_64 rng(2);
    const Matrix K = oracle::random_psd(6, 6, rng);
    Vector y(6);
    y << 1, -1, 1, -1, 1, 1;
    const Matrix Q = y.asDiagonal() * K * y.asDiagonal();
    const Vector p = -Vector::Ones(6);
    const SmoResult r = solve_smo(Q, p, y, 1.0, Vector::Zero(6), 1e-8);
    EXPECT_LE((r.gradient - (Q * r.alpha + p)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(kkt_violation(r.alpha, r.gradient, y, 1.0), r.violation, 1e-15);
}

TEST(Smo, ReportsIndefiniteMatrices) {
    Matrix Q(2, 2);
    Q << -1, 0, 0, -1;
    Vector y(2);
    y << 1, -1;
    EXPECT_THROW(solve_smo(Q, -Vector::Ones(2), y, 1.0, Vector::Zero(2), 1e-6), SolverError);
}

TEST(Smo, IterationCapIsAnError) {
    std::mt19937_64 rng(3);
    const Matrix K = oracle::random_psd(8, 8, rng);
    Vector y = Vector::Ones(8);
    y.tail(4).setConstant(-1.0);
    const Matrix Q = y.asDiagonal() * K * y.asDiagonal();
    try {
        solve_smo(Q, -Vector::Ones(8), y, 100.0, Vector::Zero(8), 1e-12, 1);
        FAIL() << "expected a solver error";
    } catch (const SolverError& e) {
        EXPECT_EQ(e.stage(), "inner");
    }
}

TEST(Smo, RejectsBadArguments) {
    const Matrix Q = Matrix::Identity(2, 2);
    const Vector y = Vector::Ones(2);
    EXPECT_THROW(solve_smo(Q, Vector::Zero(3), y, 1.0, Vector::Zero(2), 1e-6), InvalidArgument);
    EXPECT_THROW(solve_smo(Q, Vector::Zero(2), y, 0.0, Vector::Zero(2), 1e-6), InvalidArgument);
    EXPECT_THROW(solve_smo(Q, Vector::Zero(2), y, 1.0, Vector::Zero(2), 0.0), InvalidArgument);
}
