// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "mtmkl/mtmkl.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace mtmkl;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void fail(const std::string& why) {
        if (pass) detail << "first failure: " << why << "; ";
        pass = false;
    }
};

std::string data_dir() {
    const char* env = std::getenv("MTMKL_DATA_DIR");
    return env ? env : MTMKL_DATA_DIR;
}

double lplq_norm(const Matrix& x, double p, double q) {
    Vector n(x.rows());
    for (Index t = 0; t < x.rows(); ++t) n(t) = oracle::norm_p(x.row(t).transpose(), p);
    return oracle::norm_p(n, q);
}

Index argmax(const Vector& v) {
    Index i = 0;
    v.maxCoeff(&i);
    return i;
}

// max over the "up" set minus min over the "low" set of -y_i grad_i, for
// min 1/2 a'Qa + p'a s.t. y'a = const, 0 <= a <= C.
double kkt_violation(const Matrix& Q, const Vector& p, const Vector& y, const Vector& a, double C) {
    const Vector grad = Q * a + p;
    double up = -std::numeric_limits<double>::infinity(), low = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < a.size(); ++i) {
        const double v = -y(i) * grad(i);
        const bool below = a(i) < C, above = a(i) > 0.0;
        if ((y(i) > 0 && below) || (y(i) < 0 && above)) up = std::max(up, v);
        if ((y(i) > 0 && above) || (y(i) < 0 && below)) low = std::min(low, v);
    }
    return std::max(0.0, up - low);
}

bool same_traces(const IterationTrace& a, const IterationTrace& b) {
    if (a.records.size() != b.records.size()) return false;
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        const auto &x = a.records[k], &y = b.records[k];
        if (x.omega != y.omega || x.value != y.value || x.penalty != y.penalty || x.gap != y.gap ||
            x.epsilon != y.epsilon || x.backtracks != y.backtracks || !(x.theta == y.theta)) {
            return false;
        }
    }
    return a.converged == b.converged;
}

// 1. Iris sharing pattern.
void iris(Outcome& o) {
    CsvOptions csv;
    csv.header = true;
    const Dataset ds = load_dataset(data_dir() + "/iris.csv", DataFormat::Csv, csv);
    const Matrix X = scale_unit_interval(select_columns(ds.features, {0, 1})).first;
    const auto tasks = make_tasks(X, ds.labels, TaskScheme::OneVsOne);
    const std::vector<KernelSpec> kernels = {KernelSpec::linear(), KernelSpec::polynomial(2, 0.0), KernelSpec::gaussian(5.0)};
    const KernelBank bank = build_bank(kernels, tasks);
    SolverConfig cfg;
    cfg.eps0 = 1.0;
    cfg.max_outer = 500;
    const FitResult r = fit(tasks, bank, Svm{10.0}, PartiallyShared{2.0, 1.0}, cfg);
    const Matrix& g = *r.model.gamma;
    const Vector& z = *r.model.zeta;
    const double g1 = g.row(0).cwiseAbs().maxCoeff(), g2 = g.row(1).cwiseAbs().maxCoeff();
    o.detail << "|g1|=" << g1 << " |g2|=" << g2 << " argmax g3=" << kernel_kind_name(kernels[argmax(g.row(2).transpose())].kind)
             << " argmax zeta=" << kernel_kind_name(kernels[argmax(z)].kind) << "; ";
    if (g1 > 1e-6) o.fail("gamma^1 not zero");
    if (g2 > 1e-6) o.fail("gamma^2 not zero");
    if (argmax(g.row(2).transpose()) != 2) o.fail("gamma^3 not led by the gaussian kernel");
    if (argmax(z) != 1) o.fail("zeta not led by the polynomial kernel");
}

// 2. Closed-form minimizer against the projection oracle.
void closed_form(Outcome& o) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> group_size(1, 5), groups(1, 4);
    const double exps[] = {1.0, 1.5, 2.0, 3.0};
    double worst_gap = -1e300, worst_violation = 0.0, worst_active = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const Index T = groups(rng), M = group_size(rng);
        const double p = exps[rep % 4], q = exps[(rep / 4) % 4];
        Matrix c(T, M);
        for (Index i = 0; i < c.size(); ++i) c(i) = gauss(rng) + 0.3;
        const Matrix x = solve_lplq(c, p, q, 1.0);
        const double obj = c.cwiseProduct(x).sum();
        double ref = c.cwiseProduct(oracle::lplq_minimizer(c, p, q, 1.0)).sum();
        if (T == 2) ref = std::min(ref, oracle::lplq_grid_objective(c, p, q, 1.0));
        worst_gap = std::max(worst_gap, obj - ref);
        const double norm = lplq_norm(x, p, q);
        worst_violation = std::max({worst_violation, norm - 1.0, -x.minCoeff()});
        if ((c.array() < 0.0).any()) worst_active = std::max(worst_active, std::abs(norm - 1.0));
    }
    o.detail << "max(obj-oracle)=" << worst_gap << " max violation=" << worst_violation << " max |norm-1|=" << worst_active
             << "; ";
    if (worst_gap > 1e-6) o.fail("closed form worse than oracle");
    if (worst_violation > 1e-9) o.fail("infeasible minimizer");
    if (worst_active > 1e-10) o.fail("norm constraint not active");

    Matrix c(2, 2);
    c << -1, -1, -2, 0;
    const double obj = c.cwiseProduct(solve_lplq(c, 2.0, 1.0, 1.0)).sum();
    o.detail << "budget case objective=" << obj << "; ";
    if (std::abs(obj + 2.0) > 1e-12) o.fail("budget case objective is not -2");
}

// 3. Descent invariants on random multi-task problems.
void descent(Outcome& o) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> size(20, 60);
    const std::vector<KernelSpec> kernels = {KernelSpec::linear(), KernelSpec::polynomial(2), KernelSpec::gaussian(0.5),
                                             KernelSpec::gaussian(4.0)};
    const std::vector<FeasibleRegion> regions = {LpBall{2.0, 1.0},         IndependentSpace{1.5},
                                                 LpLq{2.0, 2.0, 1.0},      CommonSpace{3.0},
                                                 PartiallyShared{2.0, 2.0}, PartiallyShared{2.0, 1.0}};
    double worst_G = -1e300, worst_rise = -1e300, worst_violation = 0.0, worst_residual = -1e300;
    int runs = 0, converged = 0, iterations = 0;
    for (int kind = 0; kind < 2; ++kind) {
        for (std::size_t r = 0; r < regions.size(); ++r) {
            const auto seed = static_cast<std::uint64_t>(100 * kind + r);
            const Index n = size(rng);
            const auto tasks = kind == 0 ? synth::blobs(3, n, 2, seed) : synth::regression(3, n, 2, seed);
            const KernelBank bank = build_bank(kernels, tasks);
            const LearnerKind learner = kind == 0 ? LearnerKind{Svm{1.0}} : LearnerKind{Krr{0.5}};
            const FitResult res = fit(tasks, bank, learner, regions[r], SolverConfig{});
            const auto& rec = res.trace.records;
            ++runs;
            iterations += static_cast<int>(rec.size());
            for (std::size_t k = 0; k < rec.size(); ++k) {
                worst_G = std::max(worst_G, rec[k].gap);
                if (k > 0 && rec[k].nu == rec[k - 1].nu) worst_rise = std::max(worst_rise, rec[k].penalty - rec[k - 1].penalty);
                if (!std::holds_alternative<PartiallyShared>(regions[r])) {
                    ThetaState s;
                    s.theta = rec[k].theta;
                    worst_violation = std::max(worst_violation, region_violation(s, regions[r]));
                }
            }
            worst_violation = std::max(worst_violation, region_violation(res.state, regions[r]));
            if (res.trace.converged) {
                ++converged;
                const auto& info = res.model.info;
                worst_residual =
                    std::max(worst_residual, (info.final_value - info.final_omega) / (1.0 + std::abs(info.final_omega)));
            } else if (const auto* ps = std::get_if<PartiallyShared>(&regions[r]); !ps || ps->q != 1.0) {
                o.fail(learner_name(learner) + "/" + region_name(regions[r]) + " did not converge");
            }
        }
    }
    o.detail << runs << " runs, " << iterations << " iterations, " << converged << " converged; max G=" << worst_G
             << " max P rise=" << worst_rise << " max violation=" << worst_violation
             << " max (V-omega)/(1+|omega|)=" << worst_residual << "; ";
    if (worst_G > 1e-12) o.fail("G above 1e-12");
    if (worst_rise > 1e-9) o.fail("penalty increased");
    if (worst_violation > 1e-8) o.fail("iterate outside the region");
    if (worst_residual > 1e-6) o.fail("penalty residual too large at convergence");
}

// 4. Inner solvers against the enumeration oracle.
void inner(Outcome& o) {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<int> size(2, 8);
    std::bernoulli_distribution coin(0.5);
    double worst_gap = 0.0, worst_kkt = 0.0, worst_krr = 0.0;
    const double tol = SolverConfig{}.tol_inner;
    for (int rep = 0; rep < 50; ++rep) {
        const Index n = size(rng);
        const Matrix K = oracle::random_psd(n, n, rng);
        Vector y(n);
        for (Index i = 0; i < n; ++i) y(i) = coin(rng) ? 1.0 : -1.0;

        const double C = 0.5 + 0.1 * rep;
        const DualResult svm = maximize_dual(Svm{C}, K, y, tol);
        const Matrix Q = y.asDiagonal() * K * y.asDiagonal();
        const auto ref = oracle::enumerate_qp(Q, -Vector::Ones(n), y, 0.0, C);
        worst_gap = std::max(worst_gap, std::abs(svm.value + ref.value) / std::max(1.0, std::abs(ref.value)));
        worst_kkt = std::max(worst_kkt, kkt_violation(Q, -Vector::Ones(n), y, svm.alpha, C));

        const double Cd = std::max(0.3, 1.0 / static_cast<double>(n)) + 0.01 * rep;
        const DualResult svdd = maximize_dual(Svdd{Cd}, K, Vector(), tol);
        const auto ref2 = oracle::enumerate_qp(2.0 * K, -K.diagonal(), Vector::Ones(n), 1.0, Cd);
        worst_gap = std::max(worst_gap, std::abs(svdd.value + ref2.value) / std::max(1.0, std::abs(ref2.value)));
        worst_kkt = std::max(worst_kkt, kkt_violation(2.0 * K, -K.diagonal(), Vector::Ones(n), svdd.alpha, Cd));

        const Index m = 5 + 5 * (rep % 8);
        const Matrix Kr = oracle::random_psd(m, std::max<Index>(1, m / 2), rng);
        Vector t(m);
        std::normal_distribution<double> g;
        for (Index i = 0; i < m; ++i) t(i) = g(rng);
        const double lambda = 0.1 + 0.05 * rep;
        const DualResult krr = maximize_dual(Krr{lambda}, Kr, t, tol);
        Matrix A = Kr;
        A.diagonal().array() += lambda;
        worst_krr = std::max(worst_krr, (A * krr.alpha - t).cwiseAbs().maxCoeff());
    }
    o.detail << "max rel gap=" << worst_gap << " max KKT violation=" << worst_kkt << " max KRR residual=" << worst_krr
             << "; ";
    if (worst_gap > 1e-5) o.fail("objective gap");
    if (worst_kkt > 1e-6) o.fail("KKT violation");
    if (worst_krr > 1e-8) o.fail("KRR residual");
}

// 5. Special cases of the descent loop.
void specializations(Outcome& o) {
    const std::vector<KernelSpec> kernels = {KernelSpec::linear(), KernelSpec::polynomial(2), KernelSpec::gaussian(0.5),
                                             KernelSpec::gaussian(4.0)};
    double worst = 0.0;
    int compared = 0;
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        const auto tasks = synth::blobs(1, 40, 2, static_cast<std::uint64_t>(10 * p));
        const KernelBank bank = build_bank(kernels, tasks);
        const FeasibleRegion region = LpBall{p, 1.0};
        SolverConfig cfg;
        cfg.line_search = false;
        cfg.eps0 = 1.0;
        cfg.max_outer = 20;
        const FitResult r = fit(tasks, bank, Svm{1.0}, region, cfg);
        // Plain alternation: exact maximization over alpha, exact minimization over theta.
        ThetaState s = initial_state(region, 1, 4);
        std::optional<Vector> warm;
        for (const auto& rec : r.trace.records) {
            worst = std::max(worst, (rec.theta - s.theta).cwiseAbs().maxCoeff());
            ++compared;
            const DualResult d = maximize_dual(Svm{1.0}, combine(bank, 0, s.theta.row(0).transpose()), tasks[0].labels,
                                               cfg.tol_inner, warm);
            warm = d.alpha;
            s = solve_region(linearize(Svm{1.0}, {d.alpha}, bank, {tasks[0].labels}), region);
        }
    }
    o.detail << "(a) " << compared << " iterates, max diff=" << worst << "; ";
    if (worst > 1e-10) o.fail("unit-step iterates differ from alternation");

    const auto multi = synth::blobs(3, 30, 2, 55);
    const KernelBank mbank = build_bank(kernels, multi);
    const bool b = same_traces(fit(multi, mbank, Svm{1.0}, PartiallyShared{2.0, 1.0, 1.0, 0.0}, SolverConfig{}).trace,
                               fit(multi, mbank, Svm{1.0}, CommonSpace{2.0}, SolverConfig{}).trace);
    o.detail << "(b) " << (b ? "identical" : "different") << "; ";
    if (!b) o.fail("zero gamma radius differs from common space");

    const auto single = synth::blobs(1, 30, 2, 56);
    const KernelBank sbank = build_bank(kernels, single);
    const bool c = same_traces(fit(single, sbank, Svm{1.0}, CommonSpace{2.0}, SolverConfig{}).trace,
                               fit(single, sbank, Svm{1.0}, LpBall{2.0, 1.0}, SolverConfig{}).trace);
    o.detail << "(c) " << (c ? "identical" : "different") << "; ";
    if (!c) o.fail("single-task common space differs from the Lp ball");
}

// 6. Two tasks share a linear rule, the third needs a radial one.
void sharing(Outcome& o) {
    const std::vector<KernelSpec> kernels = {KernelSpec::linear(), KernelSpec::gaussian(2.0)};
    SolverConfig cfg;
    cfg.eps0 = 1.0;
    int recovered = 0;
    double acc_ps = 0.0, acc_cs = 0.0, acc_is = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto all = synth::shared_vs_radial(300, 1000 + seed);
        std::vector<TaskData> train, test;
        std::vector<Index> head(100), tail(200);
        std::iota(head.begin(), head.end(), 0);
        std::iota(tail.begin(), tail.end(), 100);
        for (const auto& t : all) {
            train.push_back(subset(t, head));
            test.push_back(subset(t, tail));
        }
        const KernelBank bank = build_bank(kernels, train);
        const FitResult ps = fit(train, bank, Svm{10.0}, PartiallyShared{2.0, 1.0}, cfg);
        const Matrix& g = *ps.model.gamma;
        if (g.row(0).cwiseAbs().maxCoeff() <= 1e-6 && g.row(1).cwiseAbs().maxCoeff() <= 1e-6 &&
            g.row(2).cwiseAbs().maxCoeff() > 1e-6) {
            ++recovered;
        }
        acc_ps += evaluate(ps.model, test).per_task_mean / 20.0;
        acc_cs += evaluate(fit(train, bank, Svm{10.0}, CommonSpace{2.0}, cfg).model, test).per_task_mean / 20.0;
        acc_is += evaluate(fit(train, bank, Svm{10.0}, IndependentSpace{2.0}, cfg).model, test).per_task_mean / 20.0;
    }
    o.detail << "pattern in " << recovered << "/20 seeds; mean test accuracy pscs=" << acc_ps << " cs=" << acc_cs
             << " is=" << acc_is << "; ";
    if (recovered < 16) o.fail("sharing pattern in fewer than 16 seeds");
    if (acc_ps < std::max(acc_cs, acc_is) - 1.0) o.fail("pscs accuracy more than 1 point below the best baseline");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        std::function<void(Outcome&)> run;
    };
    const Criterion criteria[] = {
        {1, "iris sharing pattern", 60.0, iris},
        {2, "closed-form minimizer vs oracle", 30.0, closed_form},
        {3, "descent invariants", 60.0, descent},
        {4, "inner solvers vs oracle", 0.0, inner},
        {5, "specialization equivalences", 0.0, specializations},
        {6, "synthetic sharing recovery", 0.0, sharing},
    };
    bool all = true;
    for (const auto& c : criteria) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0.0 && secs > c.budget_seconds) o.fail("over the time budget");
        all = all && o.pass;
        std::printf("%s criterion %d: %s (%.2fs) %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    o.detail.str().c_str());
    }
    std::printf("SKIP criterion 7: optional Landmine suite, data not bundled\n");
    return all ? 0 : 1;
}
