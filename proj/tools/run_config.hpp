#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mtmkl/mtmkl.hpp"
#include "toml_lite.hpp"

namespace mtmkl::cli {

using json = nlohmann::json;

/// Malformed or invalid run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct DatasetConfig {
    std::string path;
    /// One file per task; labels > 0 become +1, the rest -1.
    std::vector<std::string> paths;
    DataFormat format = DataFormat::Csv;
    CsvOptions csv;
    std::vector<Index> columns;
    bool scale = false;
};

struct RunConfig {
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    /// ovo | ova | binary | files
    std::string scheme = "ovo";
    std::vector<KernelSpec> kernels;
    LearnerKind learner = Svm{1.0};
    FeasibleRegion region = PartiallyShared{};
    SolverConfig solver;
    SplitSpec split;
    std::vector<double> cv_C;
    std::vector<double> cv_q;
    std::string cv_metric = "auto";
    std::string model_path;
    std::string trace_path;
    std::string report_path;
    std::string grid_path;
    std::string predictions_path;
    std::string hash;
};

namespace detail {

/// Typed access to one config table; unknown keys are reported by finish().
class Table {
public:
    Table(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("[" + name_ + "] must be a table");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    void mark(const std::string& key) { used_.insert(key); }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!j_.contains(key)) return fallback;
        return required<T>(key);
    }

    template <class T>
    T required(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where(key) + " is required");
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!j_.at(key).is_number()) throw ConfigError(where(key) + " must be a number");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!j_.at(key).is_number_integer()) throw ConfigError(where(key) + " must be an integer");
            }
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + " has the wrong type");
        }
    }

    Table sub(const std::string& key) {
        used_.insert(key);
        static const json empty = json::object();
        return Table(j_.contains(key) ? j_.at(key) : empty, name_.empty() ? key : name_ + "." + key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!used_.count(k)) throw ConfigError("unknown key '" + k + "' in " + (name_.empty() ? "top level" : "[" + name_ + "]"));
        }
    }

private:
    std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    const json& j_;
    std::string name_;
    std::set<std::string> used_;
};

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

/// Builds a RunConfig from a parsed TOML tree. Dataset paths are taken
/// relative to `base_dir`; output paths are used as given.
inline RunConfig config_from_json(const json& root, const std::filesystem::path& base_dir) {
    RunConfig c;
    detail::Table top(root, "");
    c.seed = top.get<std::uint64_t>("seed", 0);

    {
        auto t = top.sub("dataset");
        c.dataset.path = detail::resolve(base_dir, t.get<std::string>("path", ""));
        for (const auto& p : t.get<std::vector<std::string>>("paths", {})) c.dataset.paths.push_back(detail::resolve(base_dir, p));
        try {
            c.dataset.format = parse_data_format(t.get<std::string>("format", "csv"));
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
        c.dataset.csv.header = t.get<bool>("header", false);
        c.dataset.csv.label_column = t.get<int>("label_column", -1);
        const auto delim = t.get<std::string>("delimiter", ",");
        if (delim.size() != 1) throw ConfigError("dataset.delimiter must be a single character");
        c.dataset.csv.delimiter = delim[0];
        for (long long col : t.get<std::vector<long long>>("columns", {})) {
            if (col < 0) throw ConfigError("dataset.columns must be >= 0");
            c.dataset.columns.push_back(static_cast<Index>(col));
        }
        c.dataset.scale = t.get<bool>("scale", false);
        t.finish();
        if (c.dataset.path.empty() == c.dataset.paths.empty()) {
            throw ConfigError("dataset needs exactly one of 'path' or 'paths'");
        }
    }

    {
        auto t = top.sub("tasks");
        c.scheme = t.get<std::string>("scheme", c.dataset.paths.empty() ? "ovo" : "files");
        t.finish();
        if (c.scheme == "one_vs_one") c.scheme = "ovo";
        if (c.scheme == "one_vs_all") c.scheme = "ova";
        if (c.scheme != "ovo" && c.scheme != "ova" && c.scheme != "binary" && c.scheme != "files") {
            throw ConfigError("tasks.scheme must be one of ovo, ova, binary, files");
        }
        if ((c.scheme == "files") != !c.dataset.paths.empty()) {
            throw ConfigError("tasks.scheme 'files' goes with dataset.paths and only with it");
        }
    }

    top.mark("kernel");
    if (!root.contains("kernel") || !root.at("kernel").is_array() || root.at("kernel").empty()) {
        throw ConfigError("at least one [[kernel]] table is required");
    }
    for (const auto& kj : root.at("kernel")) {
        detail::Table t(kj, "kernel");
        KernelSpec k;
        try {
            k.kind = parse_kernel_kind(t.required<std::string>("kind"));
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
        k.degree = t.get<int>("degree", 2);
        k.offset = t.get<double>("offset", 1.0);
        k.spread = t.get<double>("spread", 1.0);
        k.normalized = t.get<bool>("normalized", true);
        t.finish();
        try {
            k.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
        c.kernels.push_back(k);
    }

    {
        auto t = top.sub("learner");
        const auto kind = t.get<std::string>("kind", "svm");
        if (kind == "svm") {
            c.learner = Svm{t.get<double>("C", 1.0)};
        } else if (kind == "krr") {
            c.learner = Krr{t.get<double>("lambda", 1.0)};
        } else if (kind == "svdd") {
            c.learner = Svdd{t.get<double>("C", 1.0)};
        } else if (kind == "ocsvm") {
            OneClassSvm o{t.get<double>("nu", 0.5), std::nullopt};
            if (t.has("l")) o.l = t.required<int>("l");
            c.learner = o;
        } else {
            throw ConfigError("learner.kind must be one of svm, krr, svdd, ocsvm");
        }
        t.finish();
    }

    {
        auto t = top.sub("region");
        const auto kind = t.get<std::string>("kind", "pscs");
        const double p = t.get<double>("p", 2.0);
        if (kind == "lp") {
            c.region = LpBall{p, t.get<double>("radius", 1.0)};
        } else if (kind == "lplq") {
            c.region = LpLq{p, t.get<double>("q", 1.0), t.get<double>("radius", 1.0)};
        } else if (kind == "cs") {
            c.region = CommonSpace{p};
        } else if (kind == "is") {
            c.region = IndependentSpace{p};
        } else if (kind == "pscs") {
            c.region = PartiallyShared{p, t.get<double>("q", 1.0), t.get<double>("zeta_radius", 1.0),
                                       t.get<double>("gamma_radius", 1.0)};
        } else {
            throw ConfigError("region.kind must be one of lp, lplq, cs, is, pscs");
        }
        t.finish();
    }

    {
        auto t = top.sub("solver");
        SolverConfig& s = c.solver;
        s.nu = t.get<double>("nu", s.nu);
        s.eta = t.get<double>("eta", s.eta);
        s.eps0 = t.get<double>("eps0", s.eps0);
        s.beta = t.get<double>("beta", s.beta);
        s.sigma = t.get<double>("sigma", s.sigma);
        s.tol_rel = t.get<double>("tol_rel", s.tol_rel);
        s.tol_gap = t.get<double>("tol_gap", s.tol_gap);
        s.tol_inner = t.get<double>("tol_inner", s.tol_inner);
        s.max_outer = t.get<int>("max_outer", s.max_outer);
        s.max_backtracks = t.get<int>("max_backtracks", s.max_backtracks);
        s.line_search = t.get<bool>("line_search", s.line_search);
        s.random_init = t.get<bool>("random_init", s.random_init);
        t.finish();
    }

    {
        auto t = top.sub("split");
        c.split.train_fraction = t.get<double>("train", 1.0);
        c.split.val_fraction = t.get<double>("val", 0.0);
        c.split.test_fraction = t.get<double>("test", 0.0);
        c.split.stratified = t.get<bool>("stratified", true);
        t.finish();
    }

    {
        auto t = top.sub("cv");
        c.cv_C = t.get<std::vector<double>>("C", {});
        c.cv_q = t.get<std::vector<double>>("q", {});
        c.cv_metric = t.get<std::string>("metric", "auto");
        t.finish();
        if (c.cv_metric != "auto") {
            try {
                parse_metric(c.cv_metric);
            } catch (const InvalidArgument& e) {
                throw ConfigError(e.what());
            }
        }
    }

    {
        auto t = top.sub("output");
        c.model_path = t.get<std::string>("model", "");
        c.trace_path = t.get<std::string>("trace", "");
        c.report_path = t.get<std::string>("report", "");
        c.grid_path = t.get<std::string>("grid", "");
        c.predictions_path = t.get<std::string>("predictions", "");
        t.finish();
    }
    top.finish();

    c.split.seed = c.seed;
    c.solver.seed = c.seed;
    try {
        validate(c.learner);
        validate(c.region);
        c.solver.validate();
        c.split.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    std::ostringstream h;
    h << std::hex << detail::fnv1a(root.dump());
    c.hash = h.str();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json root;
    try {
        root = tomlite::parse(in);
    } catch (const tomlite::ParseError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return config_from_json(root, std::filesystem::path(path).parent_path());
}

}  // namespace mtmkl::cli
