#include "sl0/penalty.hpp"

#include "sl0/error.hpp"

#include <cmath>

namespace sl0 {

namespace {

void require_positive_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorCode::NonPositiveSigma, "sigma must be positive and finite");
    }
}

// Profile value and scaled direction -sigma^2 f'(s) for a single entry.
struct PointEval {
    double f;
    double delta;
};

inline PointEval eval_point(Family family, double s, double sigma) {
    switch (family) {
        case Family::Gaussian: {
            const double e = std::exp(-(s * s) / (2.0 * sigma * sigma));
            return {e, s * e};
        }
        case Family::Triangular: {
            const double a = std::abs(s);
            if (a >= sigma) return {0.0, 0.0};
            if (a == 0.0) return {1.0, 0.0};
            return {1.0 - a / sigma, std::copysign(sigma, s)};
        }
        case Family::TruncatedHyperbolic: {
            const double a = std::abs(s);
            if (a >= sigma) return {0.0, 0.0};
            const double u = s / sigma;
            return {1.0 - u * u, 2.0 * s};
        }
        case Family::Rational: {
            const double s2 = sigma * sigma;
            const double d = s * s + s2;
            return {s2 / d, 2.0 * s * s2 * s2 / (d * d)};
        }
    }
    return {0.0, 0.0};
}

}  // namespace

std::string_view to_string(Family family) {
    switch (family) {
        case Family::Gaussian: return "gaussian";
        case Family::Triangular: return "triangular";
        case Family::TruncatedHyperbolic: return "hyperbolic";
        case Family::Rational: return "rational";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    if (name == "gaussian") return Family::Gaussian;
    if (name == "triangular") return Family::Triangular;
    if (name == "hyperbolic" || name == "truncated_hyperbolic") return Family::TruncatedHyperbolic;
    if (name == "rational") return Family::Rational;
    throw Error(ErrorCode::InvalidArgument, "unknown penalty family '" + std::string(name) + "'");
}

double eval_f(Family family, double s, double sigma) {
    require_positive_sigma(sigma);
    return eval_point(family, s, sigma).f;
}

double eval_F(Family family, const Eigen::Ref<const Vector>& s, double sigma) {
    require_positive_sigma(sigma);
    double total = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) total += eval_point(family, s[i], sigma).f;
    return total;
}

Vector ascent_direction(Family family, const Eigen::Ref<const Vector>& s, double sigma) {
    require_positive_sigma(sigma);
    Vector delta(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) delta[i] = eval_point(family, s[i], sigma).delta;
    return delta;
}

Vector ascent_direction_batch(Family family, const Eigen::Ref<const Matrix>& s, double sigma,
                              Matrix& delta) {
    require_positive_sigma(sigma);
    delta.resize(s.rows(), s.cols());
    Vector f_values(s.cols());
    for (Eigen::Index t = 0; t < s.cols(); ++t) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            const PointEval pe = eval_point(family, s(i, t), sigma);
            delta(i, t) = pe.delta;
            total += pe.f;
        }
        f_values[t] = total;
    }
    return f_values;
}

std::optional<double> curvature_gamma(Family family) {
    switch (family) {
        case Family::Gaussian: return 0.5;
        case Family::Rational: return 1.0;
        case Family::Triangular:
        case Family::TruncatedHyperbolic: return std::nullopt;
    }
    return std::nullopt;
}

double derivative_bound(Family family) {
    switch (family) {
        // max_u u exp(-u^2 / 2) at u = 1
        case Family::Gaussian: return std::exp(-0.5);
        case Family::Triangular: return 1.0;
        case Family::TruncatedHyperbolic: return 2.0;
        // max_u 2u / (1 + u^2)^2 at u = 1 / sqrt(3)
        case Family::Rational: return 9.0 / (8.0 * std::sqrt(3.0));
    }
    return 0.0;
}

}  // namespace sl0
