#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mtmkl/errors.hpp"
#include "mtmkl/types.hpp"

namespace mtmkl {

/// Training data of one task. Labels are +-1 for classifiers, real targets for
/// regression, and may be empty for the one-class learners.
struct TaskData {
    Matrix features;
    Vector labels;
    std::string name;

    Index size() const { return features.rows(); }
    Index dim() const { return features.cols(); }
};

/// A dense sample matrix with one label per row.
struct Dataset {
    Matrix features;
    Vector labels;
};

enum class DataFormat { LibsvmSparse, Csv };

struct CsvOptions {
    /// Column holding the label; negative values count from the end.
    int label_column = -1;
    bool header = false;
    char delimiter = ',';
};

inline DataFormat parse_data_format(const std::string& s) {
    if (s == "libsvm" || s == "libsvm_sparse") return DataFormat::LibsvmSparse;
    if (s == "csv") return DataFormat::Csv;
    throw InvalidArgument("unknown data format '" + s + "'");
}

namespace detail {

inline double parse_number(const std::string& tok, std::size_t line_no, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        if (!std::isfinite(v)) throw DataError("line " + std::to_string(line_no) + ": non-finite " + what);
        return v;
    } catch (const std::logic_error&) {
        throw DataError("line " + std::to_string(line_no) + ": cannot parse " + what + " '" + tok + "'");
    }
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline Dataset parse_libsvm(std::istream& in) {
    std::vector<double> labels;
    std::vector<std::vector<std::pair<Index, double>>> rows;
    Index max_index = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        labels.push_back(parse_number(tok, line_no, "label"));
        std::vector<std::pair<Index, double>> row;
        while (ss >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0) {
                throw DataError("line " + std::to_string(line_no) + ": expected index:value, got '" + tok + "'");
            }
            const double idx = parse_number(tok.substr(0, colon), line_no, "feature index");
            if (idx < 1 || idx != std::floor(idx)) {
                throw DataError("line " + std::to_string(line_no) + ": feature indices are 1-based integers");
            }
            const auto i = static_cast<Index>(idx);
            row.emplace_back(i - 1, parse_number(tok.substr(colon + 1), line_no, "feature value"));
            max_index = std::max(max_index, i);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("dataset is empty");
    Dataset ds{Matrix::Zero(static_cast<Index>(rows.size()), max_index), Vector(static_cast<Index>(rows.size()))};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        ds.labels(static_cast<Index>(r)) = labels[r];
        for (const auto& [c, v] : rows[r]) ds.features(static_cast<Index>(r), c) = v;
    }
    return ds;
}

inline Dataset parse_csv(std::istream& in, const CsvOptions& opt) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool skipped_header = !opt.header;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, opt.delimiter)) row.push_back(parse_number(trim(cell), line_no, "value"));
        if (width == 0) {
            width = row.size();
            if (width < 2) throw DataError("line " + std::to_string(line_no) + ": need a label and >= 1 feature");
        } else if (row.size() != width) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                            " columns, found " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("dataset is empty");
    const int w = static_cast<int>(width);
    const int label_col = opt.label_column < 0 ? w + opt.label_column : opt.label_column;
    if (label_col < 0 || label_col >= w) throw DataError("label column out of range");
    Dataset ds{Matrix(static_cast<Index>(rows.size()), w - 1), Vector(static_cast<Index>(rows.size()))};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Index c = 0;
        for (int k = 0; k < w; ++k) {
            if (k == label_col) {
                ds.labels(static_cast<Index>(r)) = rows[r][static_cast<std::size_t>(k)];
            } else {
                ds.features(static_cast<Index>(r), c++) = rows[r][static_cast<std::size_t>(k)];
            }
        }
    }
    return ds;
}

}  // namespace detail

/// Reads a dataset into dense form. For libsvm files the dimensionality is the
/// largest feature index seen anywhere in the file; absent entries are zero.
inline Dataset load_dataset(const std::string& path, DataFormat format, const CsvOptions& csv = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    return format == DataFormat::LibsvmSparse ? detail::parse_libsvm(in) : detail::parse_csv(in, csv);
}

inline Dataset parse_dataset(const std::string& text, DataFormat format, const CsvOptions& csv = {}) {
    std::istringstream in(text);
    return format == DataFormat::LibsvmSparse ? detail::parse_libsvm(in) : detail::parse_csv(in, csv);
}

inline Matrix select_rows(const Matrix& X, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = X.row(rows[r]);
    return out;
}

inline Vector select_rows(const Vector& v, const std::vector<Index>& rows) {
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = v(rows[r]);
    return out;
}

inline Matrix select_columns(const Matrix& X, const std::vector<Index>& cols) {
    Matrix out(X.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c] < 0 || cols[c] >= X.cols()) throw DataError("feature column " + std::to_string(cols[c]) + " out of range");
        out.col(static_cast<Index>(c)) = X.col(cols[c]);
    }
    return out;
}

/// Per-column affine map fitted on training data.
struct ScaleBounds {
    Vector lower;
    Vector upper;
};

/// Min-max scaling to [0,1]. Constant columns map to 0. With `fitted` given the
/// stored bounds are applied unchanged, so unseen data may leave [0,1].
inline std::pair<Matrix, ScaleBounds> scale_unit_interval(const Matrix& X,
                                                          const std::optional<ScaleBounds>& fitted = std::nullopt) {
    detail::require(X.rows() > 0, "scale_unit_interval: no rows");
    if (!X.allFinite()) throw DataError("scale_unit_interval: non-finite feature value");
    ScaleBounds b;
    if (fitted) {
        detail::require(fitted->lower.size() == X.cols() && fitted->upper.size() == X.cols(),
                        "scale_unit_interval: bounds do not match feature dimension");
        b = *fitted;
    } else {
        b.lower = X.colwise().minCoeff().transpose();
        b.upper = X.colwise().maxCoeff().transpose();
    }
    Matrix out(X.rows(), X.cols());
    for (Index c = 0; c < X.cols(); ++c) {
        const double range = b.upper(c) - b.lower(c);
        if (range > 0.0) {
            out.col(c) = (X.col(c).array() - b.lower(c)) / range;
        } else {
            out.col(c).setZero();
        }
    }
    return {out, b};
}

enum class TaskScheme { OneVsAll, OneVsOne };

inline TaskScheme parse_task_scheme(const std::string& s) {
    if (s == "one_vs_all" || s == "ova") return TaskScheme::OneVsAll;
    if (s == "one_vs_one" || s == "ovo") return TaskScheme::OneVsOne;
    throw InvalidArgument("unknown task scheme '" + s + "'");
}

inline std::vector<double> distinct_classes(const Vector& labels) {
    std::vector<double> classes(labels.data(), labels.data() + labels.size());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    return classes;
}

namespace detail {
inline std::string class_name(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}
}  // namespace detail

/// Binary tasks from a multiclass problem. Classes are ordered by value.
/// One-vs-all: task c labels class c as +1 and everything else -1, on all samples.
/// One-vs-one: task (a,b) for a < b keeps only those two classes, a as +1.
inline std::vector<TaskData> make_tasks(const Matrix& X, const Vector& class_labels, TaskScheme scheme) {
    detail::require(X.rows() == class_labels.size(), "make_tasks: one label per sample required");
    const auto classes = distinct_classes(class_labels);
    if (classes.size() < 2) throw DataError("make_tasks: need at least two classes");
    std::vector<TaskData> tasks;
    if (scheme == TaskScheme::OneVsAll) {
        for (double c : classes) {
            TaskData t{X, Vector(X.rows()), detail::class_name(c) + "_vs_rest"};
            for (Index i = 0; i < X.rows(); ++i) t.labels(i) = class_labels(i) == c ? 1.0 : -1.0;
            tasks.push_back(std::move(t));
        }
        return tasks;
    }
    for (std::size_t a = 0; a < classes.size(); ++a) {
        for (std::size_t b = a + 1; b < classes.size(); ++b) {
            std::vector<Index> rows;
            for (Index i = 0; i < X.rows(); ++i) {
                if (class_labels(i) == classes[a] || class_labels(i) == classes[b]) rows.push_back(i);
            }
            TaskData t{select_rows(X, rows), Vector(static_cast<Index>(rows.size())),
                       detail::class_name(classes[a]) + "_vs_" + detail::class_name(classes[b])};
            for (std::size_t r = 0; r < rows.size(); ++r) {
                t.labels(static_cast<Index>(r)) = class_labels(rows[r]) == classes[a] ? 1.0 : -1.0;
            }
            tasks.push_back(std::move(t));
        }
    }
    return tasks;
}

struct SplitSpec {
    double train_fraction = 1.0;
    double val_fraction = 0.0;
    double test_fraction = 0.0;
    std::uint64_t seed = 0;
    bool stratified = true;

    void validate() const {
        for (double f : {train_fraction, val_fraction, test_fraction}) {
            detail::require(f >= 0.0 && f <= 1.0, "split fractions must lie in [0,1]");
        }
        detail::require(std::abs(train_fraction + val_fraction + test_fraction - 1.0) <= 1e-12,
                        "split fractions must sum to 1");
    }
};

struct SplitIndices {
    std::vector<Index> train;
    std::vector<Index> val;
    std::vector<Index> test;
};

/// Seeded partition of row indices. Stratified splits allocate each label value
/// separately, rounding the train and validation shares per stratum.
inline SplitIndices split_indices(const Vector& labels, const SplitSpec& spec) {
    spec.validate();
    std::map<double, std::vector<Index>> strata;
    for (Index i = 0; i < labels.size(); ++i) strata[spec.stratified ? labels(i) : 0.0].push_back(i);
    std::mt19937_64 rng(spec.seed);
    SplitIndices out;
    for (auto& [key, idx] : strata) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n = static_cast<double>(idx.size());
        auto n_train = static_cast<std::size_t>(std::llround(n * spec.train_fraction));
        auto n_val = static_cast<std::size_t>(std::llround(n * spec.val_fraction));
        n_train = std::min(n_train, idx.size());
        n_val = std::min(n_val, idx.size() - n_train);
        if (spec.test_fraction == 0.0) n_val = idx.size() - n_train;
        if (spec.val_fraction == 0.0 && spec.test_fraction == 0.0) n_train = idx.size();
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.val.insert(out.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                       idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    }
    for (auto* part : {&out.train, &out.val, &out.test}) std::sort(part->begin(), part->end());
    const auto check = [](double f, const std::vector<Index>& part, const char* name) {
        if (f > 0.0 && part.empty()) throw DataError(std::string("split: empty ") + name + " partition");
    };
    check(spec.train_fraction, out.train, "train");
    check(spec.val_fraction, out.val, "validation");
    check(spec.test_fraction, out.test, "test");
    return out;
}

inline TaskData subset(const TaskData& task, const std::vector<Index>& rows) {
    TaskData out{select_rows(task.features, rows), Vector(), task.name};
    if (task.labels.size() > 0) out.labels = select_rows(task.labels, rows);
    return out;
}

struct TaskSplit {
    std::vector<TaskData> train;
    std::vector<TaskData> val;
    std::vector<TaskData> test;
};

/// Splits each task independently; task t draws from seed + t.
inline TaskSplit split(const std::vector<TaskData>& tasks, const SplitSpec& spec) {
    TaskSplit out;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        SplitSpec s = spec;
        s.seed = spec.seed + t;
        const Vector keys = tasks[t].labels.size() > 0 ? tasks[t].labels : Vector::Zero(tasks[t].size());
        const auto idx = split_indices(keys, s);
        out.train.push_back(subset(tasks[t], idx.train));
        out.val.push_back(subset(tasks[t], idx.val));
        out.test.push_back(subset(tasks[t], idx.test));
    }
    return out;
}

}  // namespace mtmkl
