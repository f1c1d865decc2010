#pragma once

#include "sl0/linalg.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace sl0 {

// Smooth surrogates f_sigma of the Kronecker delta. All four satisfy
// f(0) = 1, 0 <= f <= 1 and are even in s.
enum class Family {
    Gaussian,             // exp(-s^2 / 2 sigma^2)
    Triangular,           // 1 - |s| / sigma on |s| < sigma, 0 outside
    TruncatedHyperbolic,  // 1 - (s / sigma)^2 on |s| < sigma, 0 outside
    Rational,             // sigma^2 / (s^2 + sigma^2)
};

/// CLI names: gaussian, triangular, hyperbolic, rational.
std::string_view to_string(Family family);
Family parse_family(std::string_view name);

double eval_f(Family family, double s, double sigma);

/// F_sigma(s) = sum_i f_sigma(s_i); m - F_sigma(s) approximates ||s||_0.
double eval_F(Family family, const Eigen::Ref<const Vector>& s, double sigma);

/// delta = -sigma^2 grad F_sigma(s). For the Gaussian family this is
/// s_i exp(-s_i^2 / 2 sigma^2). Non-differentiable points get derivative 0.
Vector ascent_direction(Family family, const Eigen::Ref<const Vector>& s, double sigma);

/// Column-wise F_sigma of a batch S (m x T) together with delta, in one pass.
/// Writes delta into `delta` (resized) and returns the per-column F values.
Vector ascent_direction_batch(Family family, const Eigen::Ref<const Matrix>& s, double sigma,
                              Matrix& delta);

/// gamma = -f''(0) / 2 of the unscaled profile f(u) = f_1(u); empty for the
/// families that are not analytic at 0.
std::optional<double> curvature_gamma(Family family);

/// Smallest gamma with |d/ds f_sigma(s)| <= gamma / sigma for all s.
/// exp(-1/2) for the Gaussian family.
double derivative_bound(Family family);

}  // namespace sl0
