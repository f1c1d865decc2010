#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>

namespace sl0 {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Throws NonFinite if any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& a, const char* what);

/// Precomputed operator s -> A^T (A A^T)^{-1} v for a fixed full-row-rank A.
///
/// The factorization of A A^T is a Cholesky decomposition; the explicit
/// pseudo-inverse A^T (A A^T)^{-1} is formed once so that every projection is
/// two matrix-vector (or matrix-matrix, for batches) products. Immutable after
/// construction and safe to share between threads.
class ProjectorFactor {
public:
    /// Throws DimensionMismatch if rows > cols, RankDeficient if the condition
    /// estimate of A A^T exceeds kMaxCondition.
    explicit ProjectorFactor(const Matrix& a);

    static constexpr double kMaxCondition = 1e12;

    Eigen::Index rows() const { return a_.rows(); }
    Eigen::Index cols() const { return a_.cols(); }

    const Matrix& matrix() const { return a_; }
    const Matrix& pseudo_inverse() const { return pinv_; }

    /// Condition number estimate of A A^T (1-norm, from the Cholesky factor).
    double condition_estimate() const { return condition_; }

    /// A^T (A A^T)^{-1} v
    Vector apply(const Eigen::Ref<const Vector>& v) const;

    /// s - A^T (A A^T)^{-1} (A s - x)
    Vector project(const Eigen::Ref<const Vector>& s, const Eigen::Ref<const Vector>& x) const;

    /// Column-wise projection of S (m x T) onto {S : A S = X}, in place.
    void project_in_place(Matrix& s, const Eigen::Ref<const Matrix>& x) const;

private:
    Matrix a_;
    Matrix pinv_;
    double condition_ = 0.0;
};

/// Minimum l2-norm solution A^T (A A^T)^{-1} x.
Vector min_norm_solution(const Matrix& a, const Vector& x);

/// Projection of s onto the affine set {s : A s = x}.
Vector project_feasible(const ProjectorFactor& p, const Vector& s, const Vector& x);

/// Limits for the combinatorial routines below.
inline constexpr Eigen::Index kMaxCombinatorialCols = 20;
inline constexpr std::uint64_t kMaxEnumerations = 1'000'000;

/// Binomial coefficient, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// Unique Representation Property: every n x n column submatrix of A is
/// invertible. Columns are normalized before the determinant test.
/// Throws TooLarge when m > 20 or C(m, n) > 1e6.
bool check_urp(const Matrix& a);

/// Maximum Frobenius norm of the Moore-Penrose left inverse over every
/// submatrix built from at most n columns of A. Throws TooLarge under the same
/// guard as check_urp and NotURP when A fails it.
double compute_M(const Matrix& a);

/// Frobenius norm of A^T (A A^T)^{-1}.
double pseudo_inverse_norm(const Matrix& a);

}  // namespace sl0
