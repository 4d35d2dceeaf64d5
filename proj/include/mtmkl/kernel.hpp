#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtmkl/data.hpp"
#include "mtmkl/errors.hpp"
#include "mtmkl/types.hpp"

namespace mtmkl {

enum class KernelKind { Linear, Polynomial, Gaussian };

/// Base kernel description. Samples are rows of the feature matrices.
///
/// Linear:      x.z
/// Polynomial:  (x.z + offset)^degree
/// Gaussian:    exp(-|x - z|^2 / (2 spread^2))
///
/// With `normalized` set every kernel is used as k(x,z) / sqrt(k(x,x) k(z,z)).
struct KernelSpec {
    KernelKind kind = KernelKind::Linear;
    int degree = 2;
    double offset = 1.0;
    double spread = 1.0;
    bool normalized = true;

    static KernelSpec linear(bool normalized = true) {
        return {KernelKind::Linear, 2, 1.0, 1.0, normalized};
    }
    static KernelSpec polynomial(int degree, double offset = 1.0, bool normalized = true) {
        return {KernelKind::Polynomial, degree, offset, 1.0, normalized};
    }
    static KernelSpec gaussian(double spread, bool normalized = true) {
        return {KernelKind::Gaussian, 2, 1.0, spread, normalized};
    }

    void validate() const {
        switch (kind) {
            case KernelKind::Linear: break;
            case KernelKind::Polynomial:
                detail::require(degree >= 1, "polynomial degree must be >= 1");
                detail::require(offset >= 0.0 && std::isfinite(offset),
                                "polynomial offset must be finite and >= 0");
                break;
            case KernelKind::Gaussian:
                detail::require(spread > 0.0 && std::isfinite(spread),
                                "gaussian spread must be > 0");
                break;
        }
    }

    std::string name() const {
        switch (kind) {
            case KernelKind::Linear: return "linear";
            case KernelKind::Polynomial: return "polynomial";
            case KernelKind::Gaussian: return "gaussian";
        }
        return "unknown";
    }

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline std::string kernel_kind_name(KernelKind k) {
    return KernelSpec{k}.name();
}

inline KernelKind parse_kernel_kind(const std::string& s) {
    if (s == "linear") return KernelKind::Linear;
    if (s == "polynomial" || s == "poly") return KernelKind::Polynomial;
    if (s == "gaussian" || s == "rbf") return KernelKind::Gaussian;
    throw InvalidArgument("unknown kernel kind '" + s + "'");
}

namespace detail {

template <class A, class B>
double raw_kernel(const KernelSpec& spec, const A& x, const B& z) {
    switch (spec.kind) {
        case KernelKind::Linear: return x.dot(z);
        case KernelKind::Polynomial: return std::pow(x.dot(z) + spec.offset, spec.degree);
        case KernelKind::Gaussian:
            return std::exp(-(x - z).squaredNorm() / (2.0 * spec.spread * spec.spread));
    }
    return 0.0;
}

template <class A>
double self_similarity(const KernelSpec& spec, const A& x) {
    // Gaussian self-similarity is exactly 1 under this parametrization.
    if (spec.kind == KernelKind::Gaussian) return 1.0;
    return raw_kernel(spec, x, x);
}

inline Vector self_similarities(const KernelSpec& spec, const Matrix& X) {
    Vector s(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        s(i) = self_similarity(spec, X.row(i));
        if (spec.normalized && !(s(i) > 0.0)) {
            throw DataError("zero self-similarity for sample " + std::to_string(i) + " under normalized " +
                            spec.name() + " kernel");
        }
    }
    return s;
}

}  // namespace detail

/// Kernel value for a pair of feature vectors.
template <class A, class B>
double eval_kernel(const KernelSpec& spec, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& z) {
    spec.validate();
    detail::require(x.size() == z.size(), "eval_kernel: dimension mismatch");
    const auto xv = x.derived().reshaped();
    const auto zv = z.derived().reshaped();
    const double k = detail::raw_kernel(spec, xv, zv);
    if (!spec.normalized) return k;
    const double kxx = detail::self_similarity(spec, xv);
    const double kzz = detail::self_similarity(spec, zv);
    if (!(kxx > 0.0) || !(kzz > 0.0)) {
        throw DataError("eval_kernel: zero self-similarity under normalization");
    }
    return k / std::sqrt(kxx * kzz);
}

/// Pairwise kernel values between the rows of X and the rows of Z (Z defaults to X).
inline Matrix gram_matrix(const KernelSpec& spec, const Matrix& X, const std::optional<Matrix>& Z = std::nullopt) {
    spec.validate();
    detail::require(X.rows() > 0, "gram_matrix: empty sample matrix");
    if (!Z) {
        const Eigen::Index n = X.rows();
        Matrix K(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = j; i < n; ++i) {
                K(i, j) = detail::raw_kernel(spec, X.row(i), X.row(j));
            }
        }
        if (spec.normalized) {
            const Vector s = detail::self_similarities(spec, X);
            const Vector inv = s.cwiseSqrt().cwiseInverse();
            for (Eigen::Index j = 0; j < n; ++j) {
                for (Eigen::Index i = j; i < n; ++i) K(i, j) *= inv(i) * inv(j);
                K(j, j) = 1.0;
            }
        }
        K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
        return K;
    }
    detail::require(X.cols() == Z->cols(), "gram_matrix: dimension mismatch between X and Z");
    Matrix K(X.rows(), Z->rows());
    for (Eigen::Index j = 0; j < Z->rows(); ++j) {
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            K(i, j) = detail::raw_kernel(spec, X.row(i), Z->row(j));
        }
    }
    if (spec.normalized) {
        const Vector sx = detail::self_similarities(spec, X).cwiseSqrt().cwiseInverse();
        const Vector sz = detail::self_similarities(spec, *Z).cwiseSqrt().cwiseInverse();
        K = sx.asDiagonal() * K * sz.asDiagonal();
    }
    return K;
}

/// The T x M family of Gram matrices, immutable once built.
class KernelBank {
public:
    KernelBank() = default;

    KernelBank(std::vector<KernelSpec> specs, std::vector<std::vector<Matrix>> grams)
        : specs_(std::move(specs)), grams_(std::move(grams)) {
        for (const auto& row : grams_) {
            detail::require(row.size() == specs_.size(), "KernelBank: each task needs one gram per kernel");
            for (const auto& K : row) {
                detail::require(K.rows() == K.cols() && K.rows() == row.front().rows(),
                                "KernelBank: grams of a task must share dimension N_t");
            }
        }
    }

    std::size_t num_tasks() const { return grams_.size(); }
    std::size_t num_kernels() const { return specs_.size(); }
    Eigen::Index task_size(std::size_t t) const { return grams_.at(t).front().rows(); }
    const std::vector<KernelSpec>& specs() const { return specs_; }
    const Matrix& gram(std::size_t t, std::size_t m) const { return grams_.at(t).at(m); }

private:
    std::vector<KernelSpec> specs_;
    std::vector<std::vector<Matrix>> grams_;
};

inline KernelBank build_bank(const std::vector<KernelSpec>& specs, const std::vector<TaskData>& tasks) {
    detail::require(!specs.empty(), "build_bank: at least one kernel spec is required");
    detail::require(!tasks.empty(), "build_bank: at least one task is required");
    for (const auto& s : specs) s.validate();
    std::vector<std::vector<Matrix>> grams;
    grams.reserve(tasks.size());
    for (const auto& task : tasks) {
        if (task.size() == 0) throw DataError("build_bank: task '" + task.name + "' has no samples");
        std::vector<Matrix> row;
        row.reserve(specs.size());
        for (const auto& s : specs) row.push_back(gram_matrix(s, task.features));
        grams.push_back(std::move(row));
    }
    return KernelBank(specs, std::move(grams));
}

/// sum_m theta_m K_m^t for one task.
inline Matrix combine(const KernelBank& bank, std::size_t task, const Eigen::Ref<const Vector>& theta) {
    detail::require(task < bank.num_tasks(), "combine: task index out of range");
    detail::require(static_cast<std::size_t>(theta.size()) == bank.num_kernels(),
                    "combine: theta length must equal the number of kernels");
    detail::require((theta.array() >= 0.0).all(), "combine: kernel weights must be nonnegative");
    const Eigen::Index n = bank.task_size(task);
    Matrix K = Matrix::Zero(n, n);
    for (std::size_t m = 0; m < bank.num_kernels(); ++m) {
        if (theta(static_cast<Eigen::Index>(m)) != 0.0) {
            K.noalias() += theta(static_cast<Eigen::Index>(m)) * bank.gram(task, m);
        }
    }
    return K;
}

}  // namespace mtmkl
