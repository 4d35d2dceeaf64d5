#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "mtmkl/epf.hpp"
#include "mtmkl/model.hpp"
#include "synthetic.hpp"

using namespace mtmkl;

namespace {

TrainedModel single_kernel_model(const LearnerKind& kind, const KernelSpec& spec, const TaskData& task,
                                 const Vector& alpha) {
    TrainedModel m;
    m.kernels = {spec};
    m.region = LpBall{};
    m.learner = kind;
    m.dim = task.dim();
    m.theta = Matrix::Ones(1, 1);
    m.tasks.push_back(make_task_model(kind, task, gram_matrix(spec, task.features), alpha));
    return m;
}

TaskData line_task(std::initializer_list<double> xs, std::initializer_list<double> ys) {
    TaskData t{Matrix(static_cast<Index>(xs.size()), 1), Vector(static_cast<Index>(ys.size())), "line"};
    Index i = 0;
    for (double x : xs) t.features(i++, 0) = x;
    i = 0;
    for (double y : ys) t.labels(i++) = y;
    return t;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("mtmkl_test_" + std::to_string(::getpid()) + "_" + name);
}

FitResult small_fit() {
    const auto tasks = synth::blobs(3, 20, 2, 21);
    const KernelBank bank = build_bank({KernelSpec::linear(), KernelSpec::polynomial(2), KernelSpec::gaussian(1.0)}, tasks);
    SolverConfig cfg;
    cfg.eps0 = 1.0;
    return fit(tasks, bank, Svm{5.0}, PartiallyShared{2.0, 1.0}, cfg);
}

}  // namespace

TEST(Bias, TwoPointMargins) {
    const TaskData task = line_task({1, 0}, {1, -1});
    const TrainedModel m = single_kernel_model(Svm{10.0}, KernelSpec::linear(false), task, Vector::Constant(2, 2.0));
    EXPECT_NEAR(m.tasks[0].offset, -1.0, 1e-15);
    EXPECT_FALSE(m.tasks[0].offset_fallback);
    Vector x(1);
    x << 1.0;
    EXPECT_NEAR(decision_value(m, 0, x), 1.0, 1e-15);
    x << 0.0;
    EXPECT_NEAR(decision_value(m, 0, x), -1.0, 1e-15);
}

TEST(Bias, SymmetricDataHasZeroOffset) {
    const TaskData task = line_task({1, 2, -1, -2}, {1, 1, -1, -1});
    const KernelSpec k = KernelSpec::linear(false);
    const DualResult d = maximize_dual(Svm{10.0}, gram_matrix(k, task.features), task.labels, 1e-10);
    const TrainedModel m = single_kernel_model(Svm{10.0}, k, task, d.alpha);
    EXPECT_NEAR(m.tasks[0].offset, 0.0, 1e-8);
}

TEST(Bias, AllAtBoundUsesFlaggedMidpoint) {
    const TaskData task = line_task({1, 0}, {1, -1});
    const TrainedModel m = single_kernel_model(Svm{1.0}, KernelSpec::linear(false), task, Vector::Ones(2));
    EXPECT_TRUE(m.tasks[0].offset_fallback);
    // residuals y - g are 0 (positive at C) and -1 (negative at C)
    EXPECT_NEAR(m.tasks[0].offset, -0.5, 1e-15);
}

TEST(Bias, ZeroDualsGiveZeroFunction) {
    const TaskData task = line_task({1, 0, 3}, {1, -1, 1});
    const TrainedModel m = single_kernel_model(Svm{1.0}, KernelSpec::gaussian(1.0), task, Vector::Zero(3));
    EXPECT_EQ(m.tasks[0].offset, 0.0);
    EXPECT_EQ(m.tasks[0].alpha.size(), 0);
    const Vector f = decision_values(m, 0, Matrix::Random(10, 1));
    EXPECT_TRUE(f.isZero(0.0));
}

TEST(Bias, MarginConsistencyOnSeparableData) {
    const auto tasks = synth::blobs(1, 30, 2, 5, 6.0);
    const KernelSpec k = KernelSpec::linear();
    const Matrix K = gram_matrix(k, tasks[0].features);
    const DualResult d = maximize_dual(Svm{100.0}, K, tasks[0].labels, 1e-10);
    const TrainedModel m = single_kernel_model(Svm{100.0}, k, tasks[0], d.alpha);
    const Vector f = decision_values(m, 0, tasks[0].features);
    int free = 0;
    for (Index i = 0; i < f.size(); ++i) {
        const double margin = tasks[0].labels(i) * f(i);
        EXPECT_GE(margin, 1.0 - 1e-6);
        if (d.alpha(i) > 0.0 && d.alpha(i) < 100.0) {
            EXPECT_NEAR(margin, 1.0, 1e-6);
            ++free;
        }
    }
    EXPECT_GT(free, 0);
}

TEST(Bias, SvddAndOneClassOffsets) {
    const auto tasks = synth::blobs(1, 30, 2, 6);
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const Matrix K = gram_matrix(k, tasks[0].features);
    for (const LearnerKind& kind : {LearnerKind{Svdd{0.1}}, LearnerKind{OneClassSvm{0.2, std::nullopt}}}) {
        const DualResult d = maximize_dual(kind, K, Vector(), 1e-10);
        const TrainedModel m = single_kernel_model(kind, k, tasks[0], d.alpha);
        const Vector f = decision_values(m, 0, tasks[0].features);
        const double C = box_bound(kind, 30);
        for (Index i = 0; i < 30; ++i) {
            if (d.alpha(i) > 1e-9 && d.alpha(i) < C - 1e-9) EXPECT_NEAR(f(i), 0.0, 1e-6) << learner_name(kind);
            if (d.alpha(i) == 0.0) EXPECT_GE(f(i), -1e-6) << learner_name(kind);
        }
    }
}

TEST(Decision, UnitWeightCollapsesToOneKernel) {
    const auto tasks = synth::blobs(1, 25, 2, 7);
    const std::vector<KernelSpec> specs = {KernelSpec::linear(), KernelSpec::gaussian(0.7)};
    const Matrix K1 = gram_matrix(specs[1], tasks[0].features);
    const DualResult d = maximize_dual(Svm{1.0}, K1, tasks[0].labels, 1e-10);

    TrainedModel both;
    both.kernels = specs;
    both.learner = Svm{1.0};
    both.dim = 2;
    both.theta = Matrix(1, 2);
    both.theta << 0.0, 1.0;
    both.tasks.push_back(make_task_model(Svm{1.0}, tasks[0], K1, d.alpha));
    const TrainedModel one = single_kernel_model(Svm{1.0}, specs[1], tasks[0], d.alpha);

    const Matrix X = Matrix::Random(40, 2);
    EXPECT_TRUE(decision_values(both, 0, X) == decision_values(one, 0, X));
}

TEST(Decision, RejectsWrongDimension) {
    const TaskData task = line_task({1, 0}, {1, -1});
    const TrainedModel m = single_kernel_model(Svm{10.0}, KernelSpec::linear(false), task, Vector::Constant(2, 2.0));
    EXPECT_THROW(decision_values(m, 0, Matrix::Zero(3, 2)), InvalidArgument);
    EXPECT_THROW(decision_values(m, 1, Matrix::Zero(3, 1)), InvalidArgument);
}

TEST(Accuracy, Examples) {
    Vector y(4), s(4);
    y << 1, -1, 1, -1;
    s << 0.3, -2, 5, -0.1;
    EXPECT_EQ(accuracy(s, y), 100.0);
    EXPECT_EQ(accuracy(Vector::Ones(4), y), 50.0);
    EXPECT_EQ(accuracy(Vector::Zero(4), y), 50.0);
    EXPECT_THROW(accuracy(Vector::Ones(3), y), InvalidArgument);
}

TEST(Accuracy, OneVsAllArgmax) {
    // Task t scores a sample by its t-th coordinate.
    TrainedModel m;
    m.kernels = {KernelSpec::linear(false)};
    m.learner = Svm{1.0};
    m.dim = 3;
    m.theta = Matrix::Ones(3, 1);
    m.scheme = "one_vs_all";
    m.classes = {10, 20, 30};
    for (Index t = 0; t < 3; ++t) {
        TaskModel tm;
        tm.support = Matrix::Zero(1, 3);
        tm.support(0, t) = 1.0;
        tm.alpha = Vector::Ones(1);
        tm.labels = Vector::Ones(1);
        m.tasks.push_back(tm);
    }
    Matrix X(4, 3);
    X << 3, 1, 2,  //
        0, 5, 1,   //
        1, 1, 4,   //
        2, 2, 0;
    const auto pred = predict_classes(m, X);
    EXPECT_EQ(pred, (std::vector<double>{10, 20, 30, 10}));
    Vector truth(4);
    truth << 10, 20, 10, 20;
    EXPECT_EQ(multiclass_argmax_accuracy(m, X, truth), 50.0);

    m.scheme = "one_vs_one";
    EXPECT_THROW(predict_classes(m, X), InvalidArgument);
}

TEST(Metric, Parse) {
    EXPECT_EQ(parse_metric("per_task_accuracy_mean"), Metric::PerTaskMean);
    EXPECT_EQ(parse_metric("multiclass_argmax_accuracy"), Metric::MulticlassArgmax);
    EXPECT_THROW(parse_metric("auc"), InvalidArgument);
}

TEST(Persistence, RoundTripIsBitExact) {
    FitResult r = small_fit();
    r.model.scheme = "one_vs_one";
    r.model.classes = {1, 2};
    r.model.columns = {0, 1};
    r.model.scale = ScaleBounds{Vector::Constant(2, -0.25), Vector::Constant(2, 3.0 / 7.0)};
    r.model.info.config_hash = "abc123";
    const auto path = temp_file("roundtrip.json");
    save_model(r.model, path.string());
    const TrainedModel back = load_model(path.string());
    std::filesystem::remove(path);

    const TrainedModel& m = r.model;
    EXPECT_TRUE(back.theta == m.theta);
    ASSERT_TRUE(back.zeta && back.gamma);
    EXPECT_TRUE(*back.zeta == *m.zeta);
    EXPECT_TRUE(*back.gamma == *m.gamma);
    ASSERT_EQ(back.tasks.size(), m.tasks.size());
    for (std::size_t t = 0; t < m.tasks.size(); ++t) {
        EXPECT_TRUE(back.tasks[t].alpha == m.tasks[t].alpha);
        EXPECT_TRUE(back.tasks[t].support == m.tasks[t].support);
        EXPECT_EQ(back.tasks[t].offset, m.tasks[t].offset);
        EXPECT_EQ(back.tasks[t].name, m.tasks[t].name);
    }
    EXPECT_EQ(back.scheme, m.scheme);
    EXPECT_EQ(back.classes, m.classes);
    EXPECT_EQ(back.columns, m.columns);
    ASSERT_TRUE(back.scale);
    EXPECT_TRUE(back.scale->lower == m.scale->lower);
    EXPECT_TRUE(back.scale->upper == m.scale->upper);
    EXPECT_EQ(back.info.config_hash, "abc123");
    EXPECT_EQ(back.info.final_penalty, m.info.final_penalty);
    EXPECT_EQ(region_name(back.region), "pscs");
    EXPECT_EQ(learner_name(back.learner), "svm");
    EXPECT_EQ(to_json(back), to_json(m));

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    Matrix X(100, 2);
    for (Index i = 0; i < X.size(); ++i) X(i) = u(rng);
    for (std::size_t t = 0; t < m.tasks.size(); ++t) {
        EXPECT_EQ((decision_values(back, t, X) - decision_values(m, t, X)).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Persistence, VersionMismatchIsRejected) {
    const FitResult r = small_fit();
    auto j = nlohmann::json::parse(to_json(r.model));
    j["version"] = kModelFormatVersion + 1;
    try {
        from_json(j.dump());
        FAIL() << "expected a format error";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
}

TEST(Persistence, CorruptFilesAreRejected) {
    const FitResult r = small_fit();
    const std::string text = to_json(r.model);
    EXPECT_THROW(from_json(text.substr(0, text.size() / 2)), FormatError);
    EXPECT_THROW(from_json("{}"), FormatError);

    auto j = nlohmann::json::parse(text);
    j["theta"]["f64le"] = "!!!not base64";
    EXPECT_THROW(from_json(j.dump()), FormatError);

    j = nlohmann::json::parse(text);
    j["theta"]["rows"] = 7;
    EXPECT_THROW(from_json(j.dump()), FormatError);

    j = nlohmann::json::parse(text);
    j["format"] = "something-else";
    EXPECT_THROW(from_json(j.dump()), FormatError);

    EXPECT_THROW(load_model(temp_file("missing.json").string()), FormatError);
}
