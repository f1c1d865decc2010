#include "sl0/linalg.hpp"

#include "sl0/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace sl0 {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::NotURP: return "NotURP";
        case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::ZeroReference: return "ZeroReference";
        case ErrorCode::TooManyActive: return "TooManyActive";
        case ErrorCode::ThresholdUnreachable: return "ThresholdUnreachable";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Parse: return "Parse";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

void require_finite(const Eigen::Ref<const Matrix>& a, const char* what) {
    if (!a.allFinite()) {
        throw Error(ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
    }
}

ProjectorFactor::ProjectorFactor(const Matrix& a) : a_(a) {
    if (a.rows() < 1 || a.cols() < 1) {
        throw Error(ErrorCode::DimensionMismatch, "matrix must be non-empty");
    }
    if (a.rows() > a.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "expected an underdetermined system (rows <= cols), got " +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    require_finite(a, "matrix");

    Matrix gram(a.rows(), a.rows());
    gram.setZero();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(a);
    Eigen::LLT<Matrix> llt(gram.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::RankDeficient, "A A^T is not positive definite");
    }
    const double rcond = llt.rcond();
    condition_ = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(condition_ <= kMaxCondition)) {
        throw Error(ErrorCode::RankDeficient,
                    "condition estimate of A A^T is " + std::to_string(condition_));
    }
    pinv_ = llt.solve(a).transpose();
}

Vector ProjectorFactor::apply(const Eigen::Ref<const Vector>& v) const {
    if (v.size() != rows()) {
        throw Error(ErrorCode::DimensionMismatch, "vector length does not match matrix rows");
    }
    return pinv_ * v;
}

Vector ProjectorFactor::project(const Eigen::Ref<const Vector>& s,
                                const Eigen::Ref<const Vector>& x) const {
    if (s.size() != cols() || x.size() != rows()) {
        throw Error(ErrorCode::DimensionMismatch, "projection operands do not match A");
    }
    Vector r = a_ * s - x;
    return s - pinv_ * r;
}

void ProjectorFactor::project_in_place(Matrix& s, const Eigen::Ref<const Matrix>& x) const {
    if (s.rows() != cols() || x.rows() != rows() || s.cols() != x.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "projection operands do not match A");
    }
    Matrix r = a_ * s;
    r -= x;
    s.noalias() -= pinv_ * r;
}

Vector min_norm_solution(const Matrix& a, const Vector& x) {
    if (x.size() != a.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "right-hand side length does not match A");
    }
    require_finite(x, "right-hand side");
    return ProjectorFactor(a).apply(x);
}

Vector project_feasible(const ProjectorFactor& p, const Vector& s, const Vector& x) {
    return p.project(s, x);
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // result * (n - k + i) / i is exact at every step
        const std::uint64_t factor = n - k + i;
        if (result > std::numeric_limits<std::uint64_t>::max() / factor) {
            return std::numeric_limits<std::uint64_t>::max();
        }
        result = result * factor / i;
    }
    return result;
}

namespace {

// Calls fn(indices) for every strictly increasing index tuple of size r in [0, m).
template <class Fn>
void for_each_subset(Eigen::Index m, Eigen::Index r, Fn&& fn) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(r));
    for (Eigen::Index i = 0; i < r; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        fn(idx);
        Eigen::Index pos = r - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == m - r + pos) --pos;
        if (pos < 0) return;
        ++idx[static_cast<std::size_t>(pos)];
        for (Eigen::Index j = pos + 1; j < r; ++j) {
            idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
}

Matrix select_columns(const Matrix& a, const std::vector<Eigen::Index>& idx) {
    Matrix sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = a.col(idx[j]);
    return sub;
}

void require_combinatorial_shape(const Matrix& a) {
    if (a.rows() < 1 || a.cols() < 1) {
        throw Error(ErrorCode::DimensionMismatch, "matrix must be non-empty");
    }
    if (a.rows() > a.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "expected rows <= cols");
    }
    if (a.cols() > kMaxCombinatorialCols) {
        throw Error(ErrorCode::TooLarge, "column count " + std::to_string(a.cols()) +
                                             " exceeds the enumeration limit of " +
                                             std::to_string(kMaxCombinatorialCols));
    }
    require_finite(a, "matrix");
}

}  // namespace

bool check_urp(const Matrix& a) {
    require_combinatorial_shape(a);
    const auto n = a.rows();
    const auto m = a.cols();
    if (binomial(static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(n)) > kMaxEnumerations) {
        throw Error(ErrorCode::TooLarge, "more than 1e6 submatrices to enumerate");
    }
    Matrix normalized = a;
    for (Eigen::Index j = 0; j < m; ++j) {
        const double norm = normalized.col(j).norm();
        if (norm == 0.0) return false;
        normalized.col(j) /= norm;
    }
    bool ok = true;
    for_each_subset(m, n, [&](const std::vector<Eigen::Index>& idx) {
        if (!ok) return;
        const Matrix sub = select_columns(normalized, idx);
        if (std::abs(sub.partialPivLu().determinant()) <= 1e-10) ok = false;
    });
    return ok;
}

double compute_M(const Matrix& a) {
    require_combinatorial_shape(a);
    const auto n = a.rows();
    const auto m = a.cols();
    std::uint64_t total = 0;
    for (Eigen::Index r = 1; r <= n; ++r) {
        total += binomial(static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(r));
        if (total > kMaxEnumerations) {
            throw Error(ErrorCode::TooLarge, "more than 1e6 submatrices to enumerate");
        }
    }
    if (!check_urp(a)) {
        throw Error(ErrorCode::NotURP, "matrix does not have the unique representation property");
    }
    double best = 0.0;
    for (Eigen::Index r = 1; r <= n; ++r) {
        for_each_subset(m, r, [&](const std::vector<Eigen::Index>& idx) {
            const Matrix sub = select_columns(a, idx);
            // ||pinv(B)||_F^2 = sum of 1 / sigma_i^2 over the singular values of B
            const Vector sv = Eigen::JacobiSVD<Matrix>(sub).singularValues();
            const double norm = std::sqrt(sv.array().square().inverse().sum());
            best = std::max(best, norm);
        });
    }
    return best;
}

double pseudo_inverse_norm(const Matrix& a) {
    return ProjectorFactor(a).pseudo_inverse().norm();
}

}  // namespace sl0
