#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include "json.hpp"
#include "mtmkl/data.hpp"
#include "mtmkl/errors.hpp"
#include "mtmkl/kernel.hpp"
#include "mtmkl/learners.hpp"
#include "mtmkl/theta.hpp"
#include "mtmkl/types.hpp"

namespace mtmkl {

inline constexpr int kModelFormatVersion = 1;

/// Per-task part of a trained model. Only samples with nonzero dual weight are
/// kept (all samples for KRR).
///
/// `offset` is the bias b (SVM), the squared radius (SVDD) or rho (one-class);
/// zero for KRR. `center_sq` is alpha' K alpha for SVDD.
struct TaskModel {
    std::string name;
    Matrix support;
    Vector alpha;
    Vector labels;
    double offset = 0.0;
    bool offset_fallback = false;
    double center_sq = 0.0;
};

struct TrainingInfo {
    std::string config_hash;
    int iterations = 0;
    double final_penalty = 0.0;
    double final_value = 0.0;
    double final_omega = 0.0;
    double nu = 0.0;
    bool converged = false;
    bool hit_iteration_cap = false;
    bool line_search_stalled = false;
};

struct TrainedModel {
    std::vector<KernelSpec> kernels;
    FeasibleRegion region;
    LearnerKind learner;
    Index dim = 0;
    Matrix theta;
    std::optional<Vector> zeta;
    std::optional<Matrix> gamma;
    std::vector<TaskModel> tasks;
    /// Task construction, when the tasks came from a multiclass problem.
    std::string scheme;
    std::vector<double> classes;
    /// Input preprocessing applied before the kernels: selected columns of the
    /// raw features, then unit-interval scaling.
    std::vector<Index> columns;
    std::optional<ScaleBounds> scale;
    TrainingInfo info;

    std::size_t num_tasks() const { return tasks.size(); }
};

namespace detail {

inline bool is_free(double a, double C) { return a > 0.0 && a < C - 1e-8 * C; }

/// KKT-based offset for the trained duals on the combined training kernel K.
/// Returns {offset, used_fallback}.
inline std::pair<double, bool> recover_offset(const LearnerKind& kind, const Matrix& K, const Vector& alpha,
                                              const Vector& y) {
    const Index n = alpha.size();
    const double C = box_bound(kind, n);
    const double inf = std::numeric_limits<double>::infinity();
    const auto midpoint = [&](double lo, double hi) {
        if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
        if (std::isfinite(lo)) return lo;
        if (std::isfinite(hi)) return hi;
        return 0.0;
    };
    return std::visit(
        Overloaded{
            [&](const Svm&) -> std::pair<double, bool> {
                if ((alpha.array() == 0.0).all()) return {0.0, true};
                const Vector g = K * alpha.cwiseProduct(y);
                double sum = 0.0;
                int count = 0;
                double lb = -inf, ub = inf;
                for (Index i = 0; i < n; ++i) {
                    const double r = y(i) - g(i);
                    if (is_free(alpha(i), C)) {
                        sum += r;
                        ++count;
                    } else if ((alpha(i) <= 0.0) == (y(i) > 0)) {
                        lb = std::max(lb, r);
                    } else {
                        ub = std::min(ub, r);
                    }
                }
                if (count > 0) return {sum / count, false};
                return {midpoint(lb, ub), true};
            },
            [&](const Krr&) -> std::pair<double, bool> { return {0.0, false}; },
            [&](const Svdd&) -> std::pair<double, bool> {
                const Vector Ka = K * alpha;
                const double center = alpha.dot(Ka);
                double sum = 0.0;
                int count = 0;
                double lo = -inf, hi = inf;
                for (Index i = 0; i < n; ++i) {
                    const double dist = K(i, i) - 2.0 * Ka(i) + center;
                    if (is_free(alpha(i), C)) {
                        sum += dist;
                        ++count;
                    } else if (alpha(i) <= 0.0) {
                        lo = std::max(lo, dist);
                    } else {
                        hi = std::min(hi, dist);
                    }
                }
                if (count > 0) return {sum / count, false};
                return {midpoint(lo, hi), true};
            },
            [&](const OneClassSvm&) -> std::pair<double, bool> {
                const Vector Ka = K * alpha;
                double sum = 0.0;
                int count = 0;
                double lo = -inf, hi = inf;
                for (Index i = 0; i < n; ++i) {
                    if (is_free(alpha(i), C)) {
                        sum += Ka(i);
                        ++count;
                    } else if (alpha(i) <= 0.0) {
                        hi = std::min(hi, Ka(i));
                    } else {
                        lo = std::max(lo, Ka(i));
                    }
                }
                if (count > 0) return {sum / count, false};
                return {midpoint(lo, hi), true};
            }},
        kind);
}

}  // namespace detail

/// Builds the per-task prediction state from trained duals on the training tasks.
inline TaskModel make_task_model(const LearnerKind& kind, const TaskData& task, const Matrix& K_theta,
                                 const Vector& alpha) {
    TaskModel tm;
    tm.name = task.name;
    const Vector y = needs_labels(kind) ? task.labels : Vector::Ones(alpha.size());
    const auto [offset, fallback] = detail::recover_offset(kind, K_theta, alpha, y);
    tm.offset = offset;
    tm.offset_fallback = fallback;
    if (std::holds_alternative<Svdd>(kind)) tm.center_sq = alpha.dot(K_theta * alpha);

    std::vector<Index> keep;
    for (Index i = 0; i < alpha.size(); ++i) {
        if (std::holds_alternative<Krr>(kind) || alpha(i) != 0.0) keep.push_back(i);
    }
    tm.support = select_rows(task.features, keep);
    tm.alpha = select_rows(alpha, keep);
    tm.labels = select_rows(y, keep);
    return tm;
}

/// Decision values of task `t` for the rows of X.
///
/// SVM: sum_i a_i y_i k(x_i, x) + b. KRR: sum_i a_i k(x_i, x).
/// SVDD: R^2 - |phi(x) - center|^2. One-class: sum_i a_i k(x_i, x) - rho.
/// k is the task's combined kernel sum_m theta_m^t k_m.
inline Vector decision_values(const TrainedModel& model, std::size_t t, const Matrix& X) {
    detail::require(t < model.tasks.size(), "decision_values: task index out of range");
    detail::require(X.cols() == model.dim, "decision_values: feature dimension " + std::to_string(X.cols()) +
                                               " does not match training dimension " + std::to_string(model.dim));
    const TaskModel& tm = model.tasks[t];
    const Index S = tm.alpha.size();
    Matrix Kc = Matrix::Zero(X.rows(), S);
    Vector self = Vector::Zero(X.rows());
    const bool svdd = std::holds_alternative<Svdd>(model.learner);
    for (std::size_t m = 0; m < model.kernels.size(); ++m) {
        const double w = model.theta(static_cast<Index>(t), static_cast<Index>(m));
        if (w == 0.0) continue;
        const KernelSpec& spec = model.kernels[m];
        if (S > 0) Kc.noalias() += w * gram_matrix(spec, X, tm.support);
        if (svdd) {
            for (Index i = 0; i < X.rows(); ++i) self(i) += w * eval_kernel(spec, X.row(i), X.row(i));
        }
    }
    return std::visit(Overloaded{[&](const Svm&) -> Vector {
                                     return (Kc * tm.alpha.cwiseProduct(tm.labels)).array() + tm.offset;
                                 },
                                 [&](const Krr&) -> Vector { return Kc * tm.alpha; },
                                 [&](const Svdd&) -> Vector {
                                     const Vector dist = (self - 2.0 * Kc * tm.alpha).array() + tm.center_sq;
                                     return tm.offset - dist.array();
                                 },
                                 [&](const OneClassSvm&) -> Vector { return (Kc * tm.alpha).array() - tm.offset; }},
                      model.learner);
}

inline double decision_value(const TrainedModel& model, std::size_t t, const Eigen::Ref<const Vector>& x) {
    return decision_values(model, t, x.transpose())(0);
}

/// Class label from a score; zero counts as positive.
inline double label_of(double score) { return score >= 0.0 ? 1.0 : -1.0; }

enum class Metric { PerTaskMean, MulticlassArgmax };

inline Metric parse_metric(const std::string& s) {
    if (s == "per_task_accuracy_mean" || s == "per_task") return Metric::PerTaskMean;
    if (s == "multiclass_argmax_accuracy" || s == "multiclass_argmax") return Metric::MulticlassArgmax;
    throw InvalidArgument("unknown metric '" + s + "'");
}

/// Accuracy in percent of sign(scores) against +-1 labels.
inline double accuracy(const Vector& scores, const Vector& labels) {
    detail::require(scores.size() == labels.size() && scores.size() > 0, "accuracy: need matching nonempty inputs");
    Index hits = 0;
    for (Index i = 0; i < scores.size(); ++i) hits += label_of(scores(i)) == labels(i) ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.size());
}

struct EvalReport {
    std::vector<double> task_accuracy;
    double per_task_mean = 0.0;
    std::optional<double> multiclass;
};

/// Per-task accuracies on labeled tasks aligned with the model's tasks.
inline EvalReport evaluate(const TrainedModel& model, const std::vector<TaskData>& tasks) {
    detail::require(tasks.size() == model.tasks.size(), "evaluate: one evaluation task per model task required");
    EvalReport r;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        detail::require(tasks[t].labels.size() == tasks[t].size(), "evaluate: evaluation tasks must be labeled");
        r.task_accuracy.push_back(accuracy(decision_values(model, t, tasks[t].features), tasks[t].labels));
    }
    double sum = 0.0;
    for (double a : r.task_accuracy) sum += a;
    r.per_task_mean = sum / static_cast<double>(r.task_accuracy.size());
    return r;
}

/// Predicted class = argmax over the one-vs-all task scores (lowest task on ties).
inline std::vector<double> predict_classes(const TrainedModel& model, const Matrix& X) {
    if (model.scheme != "one_vs_all" || model.classes.size() != model.tasks.size()) {
        throw InvalidArgument("multiclass argmax needs a one-vs-all model with one task per class");
    }
    Matrix scores(X.rows(), static_cast<Index>(model.tasks.size()));
    for (std::size_t t = 0; t < model.tasks.size(); ++t) {
        scores.col(static_cast<Index>(t)) = decision_values(model, t, X);
    }
    std::vector<double> out(static_cast<std::size_t>(X.rows()));
    for (Index i = 0; i < X.rows(); ++i) {
        Index best = 0;
        scores.row(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = model.classes[static_cast<std::size_t>(best)];
    }
    return out;
}

inline double multiclass_argmax_accuracy(const TrainedModel& model, const Matrix& X, const Vector& class_labels) {
    detail::require(X.rows() == class_labels.size() && X.rows() > 0, "multiclass accuracy: need labeled samples");
    const auto pred = predict_classes(model, X);
    Index hits = 0;
    for (Index i = 0; i < X.rows(); ++i) hits += pred[static_cast<std::size_t>(i)] == class_labels(i) ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(X.rows());
}

// ---------------------------------------------------------------- persistence

namespace detail {

using json = nlohmann::json;

inline std::string base64_encode(const std::string& bytes) {
    using namespace boost::archive::iterators;
    using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
    std::string out(It(bytes.begin()), It(bytes.end()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

inline std::string base64_decode(std::string text) {
    using namespace boost::archive::iterators;
    using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
    const auto pad = static_cast<std::size_t>(std::count(text.begin(), text.end(), '='));
    if (pad > 2 || text.size() % 4 != 0) throw FormatError("corrupt base64 array");
    std::replace(text.begin(), text.end(), '=', 'A');
    try {
        std::string out(It(text.begin()), It(text.end()));
        out.erase(out.size() - pad);
        return out;
    } catch (const std::exception&) {
        throw FormatError("corrupt base64 array");
    }
}

static_assert(std::endian::native == std::endian::little, "model arrays are stored as raw little-endian doubles");

inline json encode_matrix(const Matrix& m) {
    std::string bytes(static_cast<std::size_t>(m.size()) * sizeof(double), '\0');
    if (m.size() > 0) std::memcpy(bytes.data(), m.data(), bytes.size());
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"f64le", base64_encode(bytes)}};
}

inline Matrix decode_matrix(const json& j) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    if (rows < 0 || cols < 0) throw FormatError("negative array dimension");
    const std::string bytes = base64_decode(j.at("f64le").get<std::string>());
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double)) {
        throw FormatError("array payload does not match its shape");
    }
    Matrix m(rows, cols);
    if (m.size() > 0) std::memcpy(m.data(), bytes.data(), bytes.size());
    return m;
}

inline json encode_vector(const Vector& v) { return encode_matrix(Matrix(v)); }

inline Vector decode_vector(const json& j) {
    const Matrix m = decode_matrix(j);
    if (m.cols() != 1) throw FormatError("expected a column vector");
    return m.col(0);
}

inline json encode_kernel(const KernelSpec& k) {
    return {{"kind", k.name()}, {"degree", k.degree}, {"offset", k.offset}, {"spread", k.spread},
            {"normalized", k.normalized}};
}

inline KernelSpec decode_kernel(const json& j) {
    KernelSpec k;
    k.kind = parse_kernel_kind(j.at("kind").get<std::string>());
    k.degree = j.at("degree").get<int>();
    k.offset = j.at("offset").get<double>();
    k.spread = j.at("spread").get<double>();
    k.normalized = j.at("normalized").get<bool>();
    return k;
}

inline json encode_region(const FeasibleRegion& r) {
    json j = {{"type", region_name(r)}};
    std::visit(Overloaded{[&](const LpBall& x) {
                              j["p"] = x.p;
                              j["radius"] = x.radius;
                          },
                          [&](const LpLq& x) {
                              j["p"] = x.p;
                              j["q"] = x.q;
                              j["radius"] = x.radius;
                          },
                          [&](const CommonSpace& x) { j["p"] = x.p; },
                          [&](const IndependentSpace& x) { j["p"] = x.p; },
                          [&](const PartiallyShared& x) {
                              j["p"] = x.p;
                              j["q"] = x.q;
                              j["zeta_radius"] = x.zeta_radius;
                              j["gamma_radius"] = x.gamma_radius;
                          }},
               r);
    return j;
}

inline FeasibleRegion decode_region(const json& j) {
    const auto type = j.at("type").get<std::string>();
    const double p = j.at("p").get<double>();
    if (type == "lp") return LpBall{p, j.at("radius").get<double>()};
    if (type == "lplq") return LpLq{p, j.at("q").get<double>(), j.at("radius").get<double>()};
    if (type == "cs") return CommonSpace{p};
    if (type == "is") return IndependentSpace{p};
    if (type == "pscs") {
        return PartiallyShared{p, j.at("q").get<double>(), j.at("zeta_radius").get<double>(),
                               j.at("gamma_radius").get<double>()};
    }
    throw FormatError("unknown region type '" + type + "'");
}

inline json encode_learner(const LearnerKind& k) {
    json j = {{"type", learner_name(k)}};
    std::visit(Overloaded{[&](const Svm& x) { j["C"] = x.C; }, [&](const Krr& x) { j["lambda"] = x.lambda; },
                          [&](const Svdd& x) { j["C"] = x.C; },
                          [&](const OneClassSvm& x) {
                              j["nu"] = x.nu;
                              if (x.l) j["l"] = *x.l;
                          }},
               k);
    return j;
}

inline LearnerKind decode_learner(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "svm") return Svm{j.at("C").get<double>()};
    if (type == "krr") return Krr{j.at("lambda").get<double>()};
    if (type == "svdd") return Svdd{j.at("C").get<double>()};
    if (type == "ocsvm") {
        OneClassSvm o{j.at("nu").get<double>(), std::nullopt};
        if (j.contains("l")) o.l = j.at("l").get<int>();
        return o;
    }
    throw FormatError("unknown learner type '" + type + "'");
}

}  // namespace detail

/// Versioned JSON document; numeric arrays are little-endian float64 in base64.
inline std::string to_json(const TrainedModel& m) {
    using detail::json;
    json j;
    j["format"] = "mtmkl-model";
    j["version"] = kModelFormatVersion;
    j["kernels"] = json::array();
    for (const auto& k : m.kernels) j["kernels"].push_back(detail::encode_kernel(k));
    j["region"] = detail::encode_region(m.region);
    j["learner"] = detail::encode_learner(m.learner);
    j["dim"] = m.dim;
    j["theta"] = detail::encode_matrix(m.theta);
    if (m.zeta) j["zeta"] = detail::encode_vector(*m.zeta);
    if (m.gamma) j["gamma"] = detail::encode_matrix(*m.gamma);
    j["tasks"] = json::array();
    for (const auto& t : m.tasks) {
        j["tasks"].push_back({{"name", t.name},
                              {"support", detail::encode_matrix(t.support)},
                              {"alpha", detail::encode_vector(t.alpha)},
                              {"labels", detail::encode_vector(t.labels)},
                              {"offset", detail::encode_vector(Vector::Constant(1, t.offset))},
                              {"offset_fallback", t.offset_fallback},
                              {"center_sq", detail::encode_vector(Vector::Constant(1, t.center_sq))}});
    }
    j["scheme"] = m.scheme;
    j["classes"] = m.classes;
    j["columns"] = m.columns;
    if (m.scale) {
        j["scale"] = {{"lower", detail::encode_vector(m.scale->lower)}, {"upper", detail::encode_vector(m.scale->upper)}};
    }
    j["training"] = {{"config_hash", m.info.config_hash},
                     {"iterations", m.info.iterations},
                     {"final_penalty", m.info.final_penalty},
                     {"final_value", m.info.final_value},
                     {"final_omega", m.info.final_omega},
                     {"nu", m.info.nu},
                     {"converged", m.info.converged},
                     {"hit_iteration_cap", m.info.hit_iteration_cap},
                     {"line_search_stalled", m.info.line_search_stalled}};
    return j.dump(2);
}

inline TrainedModel from_json(const std::string& text) {
    using detail::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "mtmkl-model") throw FormatError("not a model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw FormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                              std::to_string(kModelFormatVersion) + ")");
        }
        TrainedModel m;
        for (const auto& k : j.at("kernels")) m.kernels.push_back(detail::decode_kernel(k));
        m.region = detail::decode_region(j.at("region"));
        m.learner = detail::decode_learner(j.at("learner"));
        m.dim = j.at("dim").get<Index>();
        m.theta = detail::decode_matrix(j.at("theta"));
        if (j.contains("zeta")) m.zeta = detail::decode_vector(j.at("zeta"));
        if (j.contains("gamma")) m.gamma = detail::decode_matrix(j.at("gamma"));
        for (const auto& t : j.at("tasks")) {
            TaskModel tm;
            tm.name = t.at("name").get<std::string>();
            tm.support = detail::decode_matrix(t.at("support"));
            tm.alpha = detail::decode_vector(t.at("alpha"));
            tm.labels = detail::decode_vector(t.at("labels"));
            tm.offset = detail::decode_vector(t.at("offset"))(0);
            tm.offset_fallback = t.at("offset_fallback").get<bool>();
            tm.center_sq = detail::decode_vector(t.at("center_sq"))(0);
            m.tasks.push_back(std::move(tm));
        }
        m.scheme = j.at("scheme").get<std::string>();
        m.classes = j.at("classes").get<std::vector<double>>();
        m.columns = j.at("columns").get<std::vector<Index>>();
        if (j.contains("scale")) {
            m.scale = ScaleBounds{detail::decode_vector(j.at("scale").at("lower")),
                                  detail::decode_vector(j.at("scale").at("upper"))};
        }
        const json& tr = j.at("training");
        m.info.config_hash = tr.at("config_hash").get<std::string>();
        m.info.iterations = tr.at("iterations").get<int>();
        m.info.final_penalty = tr.at("final_penalty").get<double>();
        m.info.final_value = tr.at("final_value").get<double>();
        m.info.final_omega = tr.at("final_omega").get<double>();
        m.info.nu = tr.at("nu").get<double>();
        m.info.converged = tr.at("converged").get<bool>();
        m.info.hit_iteration_cap = tr.at("hit_iteration_cap").get<bool>();
        m.info.line_search_stalled = tr.at("line_search_stalled").get<bool>();

        const auto T = static_cast<Index>(m.tasks.size());
        const auto M = static_cast<Index>(m.kernels.size());
        if (m.theta.rows() != T || m.theta.cols() != M) throw FormatError("theta shape does not match tasks x kernels");
        for (const auto& tm : m.tasks) {
            if (tm.alpha.size() != tm.support.rows() || tm.labels.size() != tm.alpha.size() ||
                (tm.support.rows() > 0 && tm.support.cols() != m.dim)) {
                throw FormatError("task '" + tm.name + "' has inconsistent array shapes");
            }
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("corrupt model file: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("corrupt model file: ") + e.what());
    }
}

inline void save_model(const TrainedModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model file '" + path + "'");
    out << to_json(m) << '\n';
    if (!out) throw Error("failed writing model file '" + path + "'");
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace mtmkl
