#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <algorithm>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtmkl/mtmkl.hpp"
#include "run_config.hpp"

namespace mtmkl::cli {
namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level g_level = Level::Info;
std::mutex g_log_mutex;

Level level_from_env() {
    const char* env = std::getenv("MTMKL_LOG");
    if (!env) return Level::Info;
    const std::string v = env;
    if (v == "error") return Level::Error;
    if (v == "warn") return Level::Warn;
    if (v == "debug") return Level::Debug;
    return Level::Info;
}

void log(Level level, const std::string& msg) {
    if (level > g_level) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

struct Options {
    std::string config;
    std::string model;
    std::string data;
    std::string output;
    std::string csv;
    std::string trace;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool quiet = false;
};

RunConfig load(const Options& o) {
    if (o.config.empty()) throw ConfigError("--config is required");
    RunConfig c = load_config(o.config);
    if (o.seed) {
        c.seed = *o.seed;
        c.split.seed = *o.seed;
        c.solver.seed = *o.seed;
    }
    if (!o.trace.empty()) c.trace_path = o.trace;
    if (o.jobs < 1) throw ConfigError("--jobs must be >= 1");
    c.solver.threads = o.jobs;
    return c;
}

// ------------------------------------------------------------------ data prep

struct Prepared {
    std::vector<TaskData> train, val, test;
    /// Row-level partitions of a multiclass dataset (empty for scheme 'files').
    Dataset train_rows, val_rows, test_rows;
    std::optional<ScaleBounds> scale;
    std::vector<double> classes;
    std::string scheme;
};

Matrix pick_columns(const Matrix& X, const std::vector<Index>& cols) {
    if (cols.empty()) return X;
    for (Index c : cols) {
        if (c >= X.cols()) throw DataError("dataset.columns index " + std::to_string(c) + " out of range");
    }
    return select_columns(X, cols);
}

std::vector<TaskData> tasks_from_rows(const Dataset& d, const std::string& scheme) {
    if (d.features.rows() == 0) return {};
    if (scheme == "binary") {
        TaskData t{d.features, Vector(d.labels.size()), "task"};
        for (Index i = 0; i < d.labels.size(); ++i) t.labels(i) = d.labels(i) > 0 ? 1.0 : -1.0;
        return {t};
    }
    return make_tasks(d.features, d.labels, scheme == "ova" ? TaskScheme::OneVsAll : TaskScheme::OneVsOne);
}

Dataset rows_of(const Dataset& d, const std::vector<Index>& idx) {
    return {select_rows(d.features, idx), select_rows(d.labels, idx)};
}

Dataset load_dataset_checked(const std::string& path, const RunConfig& c) {
    if (!std::filesystem::exists(path)) throw DataError("dataset file '" + path + "' does not exist");
    Dataset d = load_dataset(path, c.dataset.format, c.dataset.csv);
    d.features = pick_columns(d.features, c.dataset.columns);
    return d;
}

/// Loads, splits and scales the data. With `merge_val` the validation part is
/// folded into the training part (scaling bounds follow the merged part).
Prepared prepare(const RunConfig& c, bool merge_val) {
    Prepared p;
    p.scheme = c.scheme;
    if (c.scheme == "files") {
        std::vector<TaskData> all;
        for (const auto& path : c.dataset.paths) {
            Dataset d = load_dataset_checked(path, c);
            TaskData t{d.features, Vector(d.labels.size()), std::filesystem::path(path).stem().string()};
            for (Index i = 0; i < d.labels.size(); ++i) t.labels(i) = d.labels(i) > 0 ? 1.0 : -1.0;
            all.push_back(std::move(t));
        }
        TaskSplit s = split(all, c.split);
        p.train = std::move(s.train);
        p.val = std::move(s.val);
        p.test = std::move(s.test);
        if (merge_val) {
            for (std::size_t t = 0; t < p.train.size(); ++t) {
                TaskData& tr = p.train[t];
                const TaskData& va = p.val[t];
                Matrix X(tr.size() + va.size(), tr.dim());
                X << tr.features, va.features;
                Vector y(tr.size() + va.size());
                y << tr.labels, va.labels;
                tr.features = X;
                tr.labels = y;
            }
            p.val.clear();
        }
        if (c.dataset.scale) {
            Index rows = 0;
            for (const auto& t : p.train) rows += t.size();
            Matrix X(rows, p.train.front().dim());
            Index r = 0;
            for (const auto& t : p.train) {
                X.middleRows(r, t.size()) = t.features;
                r += t.size();
            }
            p.scale = scale_unit_interval(X).second;
            for (auto* part : {&p.train, &p.val, &p.test}) {
                for (auto& t : *part) {
                    if (t.size() > 0) t.features = scale_unit_interval(t.features, p.scale).first;
                }
            }
        }
        return p;
    }

    Dataset d = load_dataset_checked(c.dataset.path, c);
    p.classes = distinct_classes(d.labels);
    const SplitIndices idx = split_indices(d.labels, c.split);
    p.train_rows = rows_of(d, idx.train);
    p.val_rows = rows_of(d, idx.val);
    p.test_rows = rows_of(d, idx.test);
    if (merge_val && p.val_rows.features.rows() > 0) {
        std::vector<Index> both = idx.train;
        both.insert(both.end(), idx.val.begin(), idx.val.end());
        std::sort(both.begin(), both.end());
        p.train_rows = rows_of(d, both);
        p.val_rows = Dataset{};
    }
    if (c.dataset.scale) {
        p.scale = scale_unit_interval(p.train_rows.features).second;
        for (auto* part : {&p.train_rows, &p.val_rows, &p.test_rows}) {
            if (part->features.rows() > 0) part->features = scale_unit_interval(part->features, p.scale).first;
        }
    }
    p.train = tasks_from_rows(p.train_rows, c.scheme);
    p.val = tasks_from_rows(p.val_rows, c.scheme);
    p.test = tasks_from_rows(p.test_rows, c.scheme);
    if (c.scheme == "binary") p.classes.clear();
    return p;
}

// ------------------------------------------------------------------ training

FitResult train_model(const RunConfig& c, const Prepared& p, const LearnerKind& learner,
                      const FeasibleRegion& region, int threads) {
    if (p.train.empty()) throw DataError("no training tasks");
    const KernelBank bank = build_bank(c.kernels, p.train);
    SolverConfig s = c.solver;
    s.threads = threads;
    FitResult r = fit(p.train, bank, learner, region, s);
    r.model.scheme = p.scheme == "ova" ? "one_vs_all" : p.scheme == "ovo" ? "one_vs_one" : p.scheme;
    r.model.classes = p.classes;
    r.model.columns = c.dataset.columns;
    r.model.scale = p.scale;
    r.model.info.config_hash = c.hash;
    return r;
}

bool is_ova(const Prepared& p) { return p.scheme == "ova"; }

Metric selection_metric(const RunConfig& c, const Prepared& p) {
    if (c.cv_metric != "auto") return parse_metric(c.cv_metric);
    return is_ova(p) ? Metric::MulticlassArgmax : Metric::PerTaskMean;
}

json eval_json(const TrainedModel& m, const std::vector<TaskData>& tasks, const Dataset& rows, bool ova) {
    json j;
    const EvalReport r = evaluate(m, tasks);
    j["task_accuracy"] = r.task_accuracy;
    j["per_task_accuracy_mean"] = r.per_task_mean;
    if (ova && rows.features.rows() > 0) {
        j["multiclass_argmax_accuracy"] = multiclass_argmax_accuracy(m, rows.features, rows.labels);
    }
    return j;
}

double metric_value(const TrainedModel& m, const std::vector<TaskData>& tasks, const Dataset& rows, Metric metric) {
    if (metric == Metric::MulticlassArgmax) return multiclass_argmax_accuracy(m, rows.features, rows.labels);
    return evaluate(m, tasks).per_task_mean;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

json training_json(const TrainedModel& m) {
    return {{"iterations", m.info.iterations},        {"final_penalty", m.info.final_penalty},
            {"final_value", m.info.final_value},      {"final_omega", m.info.final_omega},
            {"nu", m.info.nu},                        {"converged", m.info.converged},
            {"hit_iteration_cap", m.info.hit_iteration_cap},
            {"line_search_stalled", m.info.line_search_stalled}};
}

void warn_on_flags(const TrainedModel& m) {
    if (m.info.hit_iteration_cap) log(Level::Warn, "outer iteration cap reached; returning the last iterate");
    if (m.info.line_search_stalled) log(Level::Warn, "line search stalled; treating the iterate as converged");
    for (const auto& t : m.tasks) {
        if (t.offset_fallback) log(Level::Warn, "task " + t.name + ": no free support vector, offset from KKT interval");
    }
}

int cmd_train(const Options& o) {
    const RunConfig c = load(o);
    const Prepared p = prepare(c, false);
    log(Level::Info, "training " + std::to_string(p.train.size()) + " tasks with " + std::to_string(c.kernels.size()) +
                         " kernels, region " + region_name(c.region));
    const auto t0 = std::chrono::steady_clock::now();
    FitResult r = train_model(c, p, c.learner, c.region, o.jobs);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log(Level::Info, "fit finished in " + fmt(secs, 3) + " s");
    warn_on_flags(r.model);

    if (!c.model_path.empty()) save_model(r.model, c.model_path);
    if (!c.trace_path.empty()) {
        std::ostringstream os;
        r.trace.write_csv(os);
        write_text(c.trace_path, os.str());
    }
    json report;
    report["command"] = "train";
    report["config_hash"] = c.hash;
    report["training"] = training_json(r.model);
    report["train"] = eval_json(r.model, p.train, p.train_rows, is_ova(p));
    if (!p.test.empty()) report["test"] = eval_json(r.model, p.test, p.test_rows, is_ova(p));
    if (!c.report_path.empty()) write_text(c.report_path, report.dump(2) + "\n");

    if (!o.quiet) {
        std::cout << "final P: " << std::setprecision(10) << r.model.info.final_penalty << "\n";
        std::cout << "iterations: " << r.model.info.iterations << (r.model.info.converged ? " (converged)" : "") << "\n";
        const auto& acc = report["train"]["task_accuracy"];
        for (std::size_t t = 0; t < p.train.size(); ++t) {
            std::cout << "train accuracy " << p.train[t].name << ": " << fmt(acc[t].get<double>(), 2) << "\n";
        }
        if (report.contains("test")) {
            std::cout << "test per-task mean accuracy: " << fmt(report["test"]["per_task_accuracy_mean"].get<double>(), 2)
                      << "\n";
        }
        if (!c.model_path.empty()) std::cout << "model written to " << c.model_path << "\n";
    }
    return 0;
}

int cmd_predict(const Options& o) {
    std::string model_path = o.model;
    std::optional<RunConfig> c;
    if (!o.config.empty()) {
        c = load(o);
        if (model_path.empty()) model_path = c->model_path;
    }
    if (model_path.empty()) throw ConfigError("predict needs --model or a config with output.model");
    const TrainedModel m = load_model(model_path);

    std::string data_path = o.data;
    DataFormat format = DataFormat::Csv;
    CsvOptions csv;
    if (c) {
        if (data_path.empty()) data_path = c->dataset.path;
        format = c->dataset.format;
        csv = c->dataset.csv;
    }
    if (data_path.empty()) throw ConfigError("predict needs --data or a config with dataset.path");
    if (!std::filesystem::exists(data_path)) throw DataError("dataset file '" + data_path + "' does not exist");
    Dataset d = load_dataset(data_path, format, csv);
    Matrix X = pick_columns(d.features, m.columns);
    if (m.scale) X = scale_unit_interval(X, m.scale).first;

    std::ostringstream os;
    os << "sample_id,task,score,label\n" << std::setprecision(17);
    for (std::size_t t = 0; t < m.num_tasks(); ++t) {
        const Vector s = decision_values(m, t, X);
        for (Index i = 0; i < s.size(); ++i) {
            os << i << ',' << m.tasks[t].name << ',' << s(i) << ',' << label_of(s(i)) << '\n';
        }
    }
    std::string out = o.output;
    if (out.empty() && c) out = c->predictions_path;
    if (out.empty()) {
        std::cout << os.str();
    } else {
        write_text(out, os.str());
        if (!o.quiet) std::cout << "predictions written to " << out << "\n";
    }
    return 0;
}

LearnerKind with_C(const LearnerKind& k, double C) {
    return std::visit(Overloaded{[&](const Svm&) -> LearnerKind { return Svm{C}; },
                                 [&](const Krr&) -> LearnerKind { return Krr{C}; },
                                 [&](const Svdd&) -> LearnerKind { return Svdd{C}; },
                                 [&](const OneClassSvm& x) -> LearnerKind { return OneClassSvm{C, x.l}; }},
                      k);
}

double learner_C(const LearnerKind& k) {
    return std::visit(Overloaded{[](const Svm& x) { return x.C; }, [](const Krr& x) { return x.lambda; },
                                 [](const Svdd& x) { return x.C; }, [](const OneClassSvm& x) { return x.nu; }},
                      k);
}

std::optional<double> region_q(const FeasibleRegion& r) {
    if (const auto* x = std::get_if<LpLq>(&r)) return x->q;
    if (const auto* x = std::get_if<PartiallyShared>(&r)) return x->q;
    return std::nullopt;
}

FeasibleRegion with_q(FeasibleRegion r, double q) {
    if (auto* x = std::get_if<LpLq>(&r)) x->q = q;
    if (auto* x = std::get_if<PartiallyShared>(&r)) x->q = q;
    return r;
}

int cmd_cv(const Options& o) {
    const RunConfig c = load(o);
    if (c.split.val_fraction <= 0.0) throw ConfigError("cv needs split.val > 0");
    if (c.cv_C.empty() && c.cv_q.empty()) throw ConfigError("cv needs a nonempty cv.C or cv.q grid");
    if (!c.cv_q.empty() && !region_q(c.region)) throw ConfigError("cv.q given but region '" + region_name(c.region) + "' has no q");
    const std::vector<double> Cs = c.cv_C.empty() ? std::vector<double>{learner_C(c.learner)} : c.cv_C;
    const std::vector<double> qs = c.cv_q.empty() ? std::vector<double>{region_q(c.region).value_or(0.0)} : c.cv_q;
    for (double C : Cs) {
        try {
            validate(with_C(c.learner, C));
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("cv.C: ") + e.what());
        }
    }
    for (double q : qs) {
        try {
            validate(with_q(c.region, q));
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("cv.q: ") + e.what());
        }
    }

    const Prepared p = prepare(c, false);
    if (p.val.empty()) throw DataError("validation partition is empty");
    const Metric metric = selection_metric(c, p);

    struct Point {
        double C, q, score = 0.0;
        int iterations = 0;
        double penalty = 0.0;
        bool converged = false;
    };
    std::vector<Point> grid;
    for (double C : Cs)
        for (double q : qs) grid.push_back({C, q});
    log(Level::Info, "cross-validating " + std::to_string(grid.size()) + " grid points");

    mtmkl::detail::parallel_for(grid.size(), o.jobs, [&](std::size_t i) {
        Point& g = grid[i];
        const FitResult r = train_model(c, p, with_C(c.learner, g.C), with_q(c.region, g.q), 1);
        g.score = metric_value(r.model, p.val, p.val_rows, metric);
        g.iterations = r.model.info.iterations;
        g.penalty = r.model.info.final_penalty;
        g.converged = r.model.info.converged;
        log(Level::Debug, "C=" + fmt(g.C, 4) + " q=" + fmt(g.q, 2) + " score=" + fmt(g.score, 3));
    });

    // Best score; ties go to the smaller C, then the smaller q.
    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return grid[a].C != grid[b].C ? grid[a].C < grid[b].C : grid[a].q < grid[b].q;
    });
    std::size_t best = order.front();
    for (std::size_t i : order) {
        if (grid[i].score > grid[best].score) best = i;
    }

    const bool has_q = region_q(c.region).has_value();
    std::ostringstream csv;
    csv << "C,q,val_score,iterations,final_penalty,converged\n" << std::setprecision(17);
    for (const auto& g : grid) {
        csv << g.C << ',';
        if (has_q) csv << g.q;
        csv << ',' << g.score << ',' << g.iterations << ',' << g.penalty << ',' << (g.converged ? 1 : 0) << '\n';
    }
    if (!c.grid_path.empty()) write_text(c.grid_path, csv.str());

    const Prepared full = prepare(c, true);
    const LearnerKind learner = with_C(c.learner, grid[best].C);
    const FeasibleRegion region = with_q(c.region, grid[best].q);
    FitResult r = train_model(c, full, learner, region, o.jobs);
    warn_on_flags(r.model);
    if (!c.model_path.empty()) save_model(r.model, c.model_path);
    if (!c.trace_path.empty()) {
        std::ostringstream os;
        r.trace.write_csv(os);
        write_text(c.trace_path, os.str());
    }

    json report;
    report["command"] = "cv";
    report["config_hash"] = c.hash;
    report["metric"] = metric == Metric::MulticlassArgmax ? "multiclass_argmax_accuracy" : "per_task_accuracy_mean";
    report["grid_points"] = grid.size();
    report["selected"] = {{"C", grid[best].C}, {"val_score", grid[best].score}};
    if (has_q) report["selected"]["q"] = grid[best].q;
    report["training"] = training_json(r.model);
    if (!full.test.empty()) report["test"] = eval_json(r.model, full.test, full.test_rows, is_ova(full));
    if (!c.report_path.empty()) write_text(c.report_path, report.dump(2) + "\n");

    if (!o.quiet) {
        std::cout << "grid points: " << grid.size() << "\n";
        std::cout << "selected C = " << grid[best].C;
        if (has_q) std::cout << ", q = " << grid[best].q;
        std::cout << " (validation score " << fmt(grid[best].score, 2) << ")\n";
        if (report.contains("test")) {
            const auto& t = report["test"];
            std::cout << "test per-task mean accuracy: " << fmt(t["per_task_accuracy_mean"].get<double>(), 2) << "\n";
            if (t.contains("multiclass_argmax_accuracy")) {
                std::cout << "test multiclass argmax accuracy: " << fmt(t["multiclass_argmax_accuracy"].get<double>(), 2)
                          << "\n";
            }
        }
    }
    return 0;
}

std::string kernel_label(const KernelSpec& k) {
    std::ostringstream os;
    switch (k.kind) {
        case KernelKind::Linear: os << "linear"; break;
        case KernelKind::Polynomial: os << "poly(d=" << k.degree << ",c=" << k.offset << ")"; break;
        case KernelKind::Gaussian: os << "gaussian(s=" << k.spread << ")"; break;
    }
    return os.str();
}

int cmd_inspect(const Options& o) {
    if (o.model.empty()) throw ConfigError("inspect needs a model path");
    const TrainedModel m = load_model(o.model);
    const auto T = static_cast<Index>(m.tasks.size());
    std::vector<std::string> headers;
    std::vector<Vector> columns;
    const bool pscs = std::holds_alternative<PartiallyShared>(m.region);
    const bool cs = std::holds_alternative<CommonSpace>(m.region);
    if ((pscs || cs) && m.zeta) {
        headers.push_back("zeta");
        columns.push_back(*m.zeta);
    }
    if (pscs && m.gamma) {
        for (Index t = 0; t < T; ++t) {
            headers.push_back("gamma" + std::to_string(t + 1));
            columns.push_back(m.gamma->row(t).transpose());
        }
    } else if (!cs) {
        for (Index t = 0; t < T; ++t) {
            headers.push_back("theta" + std::to_string(t + 1));
            columns.push_back(m.theta.row(t).transpose());
        }
    }

    std::size_t name_w = 6;
    for (const auto& k : m.kernels) name_w = std::max(name_w, kernel_label(k).size());
    std::ostringstream table;
    table << std::left << std::setw(static_cast<int>(name_w) + 2) << "kernel";
    for (const auto& h : headers) table << std::right << std::setw(12) << h;
    table << "\n";
    for (std::size_t k = 0; k < m.kernels.size(); ++k) {
        table << std::left << std::setw(static_cast<int>(name_w) + 2) << kernel_label(m.kernels[k]);
        for (const auto& col : columns) table << std::right << std::setw(12) << fmt(col(static_cast<Index>(k)), 4);
        table << "\n";
    }
    for (Index t = 0; t < T; ++t) {
        table << "task " << t + 1 << ": " << m.tasks[static_cast<std::size_t>(t)].name << "\n";
    }

    std::ostringstream csv;
    csv << "kernel";
    for (const auto& h : headers) csv << ',' << h;
    csv << "\n" << std::setprecision(17);
    for (std::size_t k = 0; k < m.kernels.size(); ++k) {
        csv << '"' << kernel_label(m.kernels[k]) << '"';
        for (const auto& col : columns) csv << ',' << col(static_cast<Index>(k));
        csv << "\n";
    }
    const std::string csv_path = o.csv.empty() ? o.model + ".coefficients.csv" : o.csv;
    write_text(csv_path, csv.str());

    std::cout << "region: " << region_name(m.region) << ", learner: " << learner_name(m.learner) << ", tasks: " << T
              << "\n"
              << table.str();
    if (!o.quiet) std::cout << "coefficients written to " << csv_path << "\n";
    return 0;
}

int report_error(const std::string& stage, const std::string& what, int code) {
    std::string line = what;
    std::replace(line.begin(), line.end(), '\n', ' ');
    std::cerr << "error[" << stage << "]: " << line << std::endl;
    return code;
}

}  // namespace
}  // namespace mtmkl::cli

int main(int argc, char** argv) {
    using namespace mtmkl::cli;
    CLI::App app{"Multi-task multiple kernel learning"};
    app.require_subcommand(1);
    Options o;
    std::optional<std::uint64_t> seed;
    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Run configuration (TOML)");
        sub->add_option("--seed", seed, "Override the configured seed");
        sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", o.quiet, "Only print errors and requested tables");
    };
    auto* train = app.add_subcommand("train", "Fit a model");
    common(train);
    train->add_option("--trace", o.trace, "Write the iteration trace CSV here");
    auto* predict = app.add_subcommand("predict", "Score samples with a trained model");
    common(predict);
    predict->add_option("--model", o.model, "Model file");
    predict->add_option("--data", o.data, "Dataset to score (defaults to the configured dataset)");
    predict->add_option("--output", o.output, "Prediction CSV path (defaults to stdout)");
    auto* cv = app.add_subcommand("cv", "Grid search over C and q on the validation split");
    common(cv);
    cv->add_option("--trace", o.trace, "Write the final fit's iteration trace CSV here");
    auto* inspect = app.add_subcommand("inspect", "Print learned kernel coefficients");
    inspect->add_option("model", o.model, "Model file")->required();
    inspect->add_option("--csv", o.csv, "Coefficient CSV path (defaults to MODEL.coefficients.csv)");
    inspect->add_flag("--quiet", o.quiet, "Only print the table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("config", e.what(), 2);
    }
    o.seed = seed;
    g_level = o.quiet ? Level::Warn : level_from_env();
    if (o.quiet && level_from_env() < Level::Warn) g_level = level_from_env();

    try {
        if (*train) return cmd_train(o);
        if (*predict) return cmd_predict(o);
        if (*cv) return cmd_cv(o);
        if (*inspect) return cmd_inspect(o);
    } catch (const ConfigError& e) {
        return report_error("config", e.what(), 2);
    } catch (const mtmkl::InvalidArgument& e) {
        return report_error("config", e.what(), 2);
    } catch (const mtmkl::DataError& e) {
        return report_error("data", e.what(), 3);
    } catch (const mtmkl::FormatError& e) {
        return report_error("data", e.what(), 3);
    } catch (const mtmkl::SolverError& e) {
        return report_error("solver:" + e.stage(), e.what(), 4);
    } catch (const std::exception& e) {
        return report_error("internal", e.what(), 1);
    }
    return 0;
}
