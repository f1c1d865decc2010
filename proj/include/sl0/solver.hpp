#pragma once

#include "sl0/linalg.hpp"
#include "sl0/penalty.hpp"

#include <cmath>
#include <optional>
#include <variant>
#include <vector>

namespace sl0 {

/// Strictly decreasing, positive sequence sigma_1 > ... > sigma_J (J >= 1).
class SigmaSchedule {
public:
    explicit SigmaSchedule(std::vector<double> values);

    /// [1, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01]
    static SigmaSchedule standard();

    /// sigma1, sigma1 c, sigma1 c^2, ... while above sigma_min, then sigma_min
    /// itself. When sigma1 <= sigma_min the schedule is just [sigma_min].
    static SigmaSchedule geometric(double sigma1, double c, double sigma_min);

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double front() const { return values_.front(); }
    double back() const { return values_.back(); }

private:
    std::vector<double> values_;
};

/// Geometric schedule whose first level may be chosen from the data.
struct GeometricSchedule {
    std::optional<double> sigma1;  // empty: auto_sigma1 of the minimum-norm solution
    double c = 0.5;
    double sigma_min = 0.01;
};

enum class StopMode {
    FixedL,      // L ascent/projection steps per sigma level
    ThresholdF,  // iterate until F_sigma(s) >= target_F, fail after max_inner steps
};

struct SolverConfig {
    std::variant<SigmaSchedule, GeometricSchedule> schedule = SigmaSchedule::standard();
    double mu = 2.5;
    int L = 3;
    Family family = Family::Gaussian;
    StopMode mode = StopMode::FixedL;
    std::optional<double> target_F;  // defaults to m - n/2
    int max_inner = 1000;
    // Keep a copy of the estimate after every sigma level in the trace.
    bool record_iterates = false;

    /// Throws InvalidArgument on mu <= 0, L < 1, c outside (0,1), etc.
    void validate() const;
};

struct TraceEntry {
    double sigma = 0.0;
    double F = 0.0;
    double residual = 0.0;
    int inner_iterations = 0;
    Vector iterate;  // empty unless SolverConfig::record_iterates
};

struct SolveReport {
    Vector estimate;
    std::vector<TraceEntry> trace;
    double wall_time = 0.0;  // seconds; amortized per column for batch solves
};

/// 2 max_i |s0_i|. Throws ZeroVector when s0 is identically zero.
double auto_sigma1(const Vector& s0);

/// Concrete schedule for a problem whose minimum-norm solution is s0.
SigmaSchedule resolve_schedule(const SolverConfig& cfg, const Vector& s0);

/// `steps` iterations of s <- project(s - mu delta) at a fixed sigma, starting
/// from an arbitrary point s (the inner loop of the solver).
Vector ascend_at_sigma(const ProjectorFactor& p, const Vector& x, Vector s, double sigma, double mu,
                       Family family, int steps);

SolveReport sl0_solve(const Matrix& a, const Vector& x, const SolverConfig& cfg = {});
SolveReport sl0_solve(const ProjectorFactor& p, const Vector& x, const SolverConfig& cfg = {});

/// Solves A s_t = x_t for every column of X (n x T) sharing one factorization.
/// In FixedL mode columns are advanced together in blocks with matrix-matrix
/// products; `jobs` threads process blocks concurrently. The block layout does
/// not depend on `jobs`, so results are identical for any thread count.
std::vector<SolveReport> sl0_solve_batch(const Matrix& a, const Matrix& x,
                                         const SolverConfig& cfg = {}, unsigned jobs = 1);
std::vector<SolveReport> sl0_solve_batch(const ProjectorFactor& p, const Matrix& x,
                                         const SolverConfig& cfg = {}, unsigned jobs = 1);

inline const double kGaussianGamma = std::exp(-0.5);

/// Smallest sigma for noisy mixtures x = A s + n with ||n|| < epsilon:
///   m gamma epsilon ||A^T (A A^T)^{-1}|| / (n - 2k)
/// Throws TooManyActive unless 2k < n.
double suggest_sigma_floor_noisy(Eigen::Index m, Eigen::Index n, Eigen::Index k, double epsilon,
                                 double gamma, double pinv_norm);
/// Same, with the Frobenius norm of the pseudo-inverse computed from A.
double suggest_sigma_floor_noisy(const Matrix& a, Eigen::Index k, double epsilon,
                                 double gamma = kGaussianGamma);

/// Accuracy constant C of the noisy Gaussian case: error <= C epsilon.
/// Needs compute_M, so the same size guard applies.
double noisy_accuracy_constant(const Matrix& a, Eigen::Index k);

struct ErrorBound {
    double alpha = 0.0;  // (floor(n/2)+1)-th largest |s_hat_i|
    double M = 0.0;
    double bound = 0.0;  // (M + 1) m alpha
};

/// A-posteriori bound on ||s_hat - s0|| valid whenever ||s0||_0 <= n/2 and
/// A s_hat = x. Throws TooLarge for matrices outside the compute_M guard.
ErrorBound error_upper_bound(const Matrix& a, const Vector& s_hat);

/// (M + 1) m sigma sqrt(2 ln m): error bound for the Gaussian family once
/// F_sigma(s_hat) >= m - (n - k).
double gaussian_error_bound(double M, Eigen::Index m, double sigma);

struct IrlsConfig {
    double p_norm = 0.0;
    int iterations = 50;
    double regularizer = 1e-8;
};

/// Iteratively reweighted least squares (FOCUSS form):
///   s <- W A^T (A W A^T)^{-1} x,  W = diag(|s_i|^(2-p) + regularizer)
/// started from the minimum-norm solution and re-projected onto A s = x at the end.
Vector irls_solve(const Matrix& a, const Vector& x, const IrlsConfig& cfg = {});
Vector irls_solve(const ProjectorFactor& p, const Vector& x, const IrlsConfig& cfg = {});

}  // namespace sl0
