#include "sl0/solver.hpp"

#include "sl0/error.hpp"
#include "sl0/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace sl0 {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Columns advanced together by one batch block.
constexpr Eigen::Index kBatchBlock = 64;

}  // namespace

SigmaSchedule::SigmaSchedule(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw Error(ErrorCode::InvalidArgument, "sigma schedule must not be empty");
    }
    for (std::size_t j = 0; j < values_.size(); ++j) {
        if (!(values_[j] > 0.0) || !std::isfinite(values_[j])) {
            throw Error(ErrorCode::NonPositiveSigma, "sigma schedule entries must be positive");
        }
        if (j > 0 && !(values_[j] < values_[j - 1])) {
            throw Error(ErrorCode::InvalidArgument, "sigma schedule must be strictly decreasing");
        }
    }
}

SigmaSchedule SigmaSchedule::standard() {
    return SigmaSchedule({1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01});
}

SigmaSchedule SigmaSchedule::geometric(double sigma1, double c, double sigma_min) {
    if (!(c > 0.0 && c < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "decrease factor c must lie in (0, 1)");
    }
    if (!(sigma1 > 0.0) || !(sigma_min > 0.0)) {
        throw Error(ErrorCode::NonPositiveSigma, "sigma1 and sigma_min must be positive");
    }
    std::vector<double> values;
    if (sigma1 > sigma_min) {
        values.push_back(sigma1);
        // the relative slack keeps c^j landing on sigma_min from producing a
        // near-duplicate final level
        while (values.back() * c > sigma_min * (1.0 + 1e-12)) values.push_back(values.back() * c);
    }
    values.push_back(sigma_min);
    return SigmaSchedule(std::move(values));
}

void SolverConfig::validate() const {
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw Error(ErrorCode::InvalidArgument, "mu must be positive");
    }
    if (L < 1) throw Error(ErrorCode::InvalidArgument, "L must be at least 1");
    if (max_inner < 1) throw Error(ErrorCode::InvalidArgument, "max_inner must be at least 1");
    if (const auto* g = std::get_if<GeometricSchedule>(&schedule)) {
        if (!(g->c > 0.0 && g->c < 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "decrease factor c must lie in (0, 1)");
        }
        if (!(g->sigma_min > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "sigma_min must be positive");
        if (g->sigma1 && !(*g->sigma1 > 0.0)) {
            throw Error(ErrorCode::NonPositiveSigma, "sigma1 must be positive");
        }
    }
}

double auto_sigma1(const Vector& s0) {
    const double peak = s0.size() ? s0.cwiseAbs().maxCoeff() : 0.0;
    if (!(peak > 0.0)) throw Error(ErrorCode::ZeroVector, "cannot scale sigma from a zero vector");
    return 2.0 * peak;
}

SigmaSchedule resolve_schedule(const SolverConfig& cfg, const Vector& s0) {
    if (const auto* fixed = std::get_if<SigmaSchedule>(&cfg.schedule)) return *fixed;
    const auto& g = std::get<GeometricSchedule>(cfg.schedule);
    return SigmaSchedule::geometric(g.sigma1 ? *g.sigma1 : auto_sigma1(s0), g.c, g.sigma_min);
}

namespace {

// The schedule is the same for every right-hand side unless sigma1 is automatic.
std::optional<SigmaSchedule> shared_schedule(const SolverConfig& cfg) {
    if (const auto* fixed = std::get_if<SigmaSchedule>(&cfg.schedule)) return *fixed;
    const auto& g = std::get<GeometricSchedule>(cfg.schedule);
    if (g.sigma1) return SigmaSchedule::geometric(*g.sigma1, g.c, g.sigma_min);
    return std::nullopt;
}

double default_target(const ProjectorFactor& p) {
    return static_cast<double>(p.cols()) - static_cast<double>(p.rows()) / 2.0;
}

void ascent_step(const ProjectorFactor& p, const Vector& x, const SolverConfig& cfg, double sigma,
                 Vector& s) {
    s -= cfg.mu * ascent_direction(cfg.family, s, sigma);
    s = p.project(s, x);
}

}  // namespace

Vector ascend_at_sigma(const ProjectorFactor& p, const Vector& x, Vector s, double sigma, double mu,
                       Family family, int steps) {
    if (s.size() != p.cols() || x.size() != p.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "operands do not match A");
    }
    for (int l = 0; l < steps; ++l) {
        s -= mu * ascent_direction(family, s, sigma);
        s = p.project(s, x);
    }
    return s;
}

SolveReport sl0_solve(const ProjectorFactor& p, const Vector& x, const SolverConfig& cfg) {
    const auto start = Clock::now();
    cfg.validate();
    if (x.size() != p.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "right-hand side length does not match A");
    }
    require_finite(x, "right-hand side");

    SolveReport report;
    const double m = static_cast<double>(p.cols());

    if (x.isZero(0.0)) {
        report.estimate = Vector::Zero(p.cols());
        if (auto schedule = shared_schedule(cfg)) {
            for (double sigma : schedule->values()) {
                TraceEntry entry{sigma, m, 0.0, 0, {}};
                if (cfg.record_iterates) entry.iterate = report.estimate;
                report.trace.push_back(std::move(entry));
            }
        }
        report.wall_time = seconds_since(start);
        return report;
    }

    Vector s = p.apply(x);
    const SigmaSchedule schedule = resolve_schedule(cfg, s);
    const double target = cfg.target_F.value_or(default_target(p));

    report.trace.reserve(schedule.size());
    for (double sigma : schedule.values()) {
        int inner = 0;
        if (cfg.mode == StopMode::FixedL) {
            for (; inner < cfg.L; ++inner) ascent_step(p, x, cfg, sigma, s);
        } else {
            while (eval_F(cfg.family, s, sigma) < target) {
                if (inner == cfg.max_inner) {
                    throw Error(ErrorCode::ThresholdUnreachable,
                                "F_sigma stayed below " + std::to_string(target) + " after " +
                                    std::to_string(cfg.max_inner) + " steps at sigma = " +
                                    std::to_string(sigma) +
                                    "; the sigma sequence probably decreases too fast");
                }
                ascent_step(p, x, cfg, sigma, s);
                ++inner;
            }
        }
        TraceEntry entry;
        entry.sigma = sigma;
        entry.F = eval_F(cfg.family, s, sigma);
        entry.residual = (p.matrix() * s - x).norm();
        entry.inner_iterations = inner;
        if (cfg.record_iterates) entry.iterate = s;
        report.trace.push_back(std::move(entry));
    }
    report.estimate = std::move(s);
    report.wall_time = seconds_since(start);
    return report;
}

SolveReport sl0_solve(const Matrix& a, const Vector& x, const SolverConfig& cfg) {
    const auto start = Clock::now();
    const ProjectorFactor p(a);
    SolveReport report = sl0_solve(p, x, cfg);
    report.wall_time = seconds_since(start);
    return report;
}

namespace {

// Lock-step FixedL iteration over columns [begin, end) of X.
void solve_block(const ProjectorFactor& p, const Matrix& x, const SolverConfig& cfg,
                 const SigmaSchedule& schedule, Eigen::Index begin, Eigen::Index end,
                 std::vector<SolveReport>& out) {
    const Eigen::Index width = end - begin;
    const Matrix xb = x.middleCols(begin, width);
    Matrix s = p.pseudo_inverse() * xb;
    Matrix delta;
    Matrix residual;
    for (Eigen::Index t = 0; t < width; ++t) out[static_cast<std::size_t>(begin + t)].trace.reserve(schedule.size());

    for (double sigma : schedule.values()) {
        for (int l = 0; l < cfg.L; ++l) {
            ascent_direction_batch(cfg.family, s, sigma, delta);
            s -= cfg.mu * delta;
            p.project_in_place(s, xb);
        }
        const Vector f_values = ascent_direction_batch(cfg.family, s, sigma, delta);
        residual = p.matrix() * s;
        residual -= xb;
        for (Eigen::Index t = 0; t < width; ++t) {
            TraceEntry entry;
            entry.sigma = sigma;
            entry.F = f_values[t];
            entry.residual = residual.col(t).norm();
            entry.inner_iterations = cfg.L;
            if (cfg.record_iterates) entry.iterate = s.col(t);
            out[static_cast<std::size_t>(begin + t)].trace.push_back(std::move(entry));
        }
    }
    for (Eigen::Index t = 0; t < width; ++t) out[static_cast<std::size_t>(begin + t)].estimate = s.col(t);
}

}  // namespace

std::vector<SolveReport> sl0_solve_batch(const ProjectorFactor& p, const Matrix& x,
                                         const SolverConfig& cfg, unsigned jobs) {
    const auto start = Clock::now();
    cfg.validate();
    if (x.rows() != p.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "mixture rows do not match A");
    }
    require_finite(x, "mixture matrix");
    const Eigen::Index count = x.cols();
    std::vector<SolveReport> reports(static_cast<std::size_t>(count));
    if (count == 0) return reports;

    const auto schedule = shared_schedule(cfg);
    if (cfg.mode == StopMode::FixedL && schedule && count > 1) {
        const std::size_t blocks = static_cast<std::size_t>((count + kBatchBlock - 1) / kBatchBlock);
        parallel_for(blocks, jobs, [&](std::size_t b) {
            const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBatchBlock;
            const Eigen::Index end = std::min(count, begin + kBatchBlock);
            solve_block(p, x, cfg, *schedule, begin, end, reports);
        });
    } else {
        // Single columns, per-column schedules or stopping rules: solve one by one.
        parallel_for(static_cast<std::size_t>(count), jobs, [&](std::size_t t) {
            reports[t] = sl0_solve(p, x.col(static_cast<Eigen::Index>(t)), cfg);
        });
    }

    const double per_column = seconds_since(start) / static_cast<double>(count);
    for (auto& r : reports) r.wall_time = per_column;
    return reports;
}

std::vector<SolveReport> sl0_solve_batch(const Matrix& a, const Matrix& x, const SolverConfig& cfg,
                                         unsigned jobs) {
    const auto start = Clock::now();
    const ProjectorFactor p(a);
    auto reports = sl0_solve_batch(p, x, cfg, jobs);
    const double per_column = seconds_since(start) / static_cast<double>(std::max<Eigen::Index>(1, x.cols()));
    for (auto& r : reports) r.wall_time = per_column;
    return reports;
}

double suggest_sigma_floor_noisy(Eigen::Index m, Eigen::Index n, Eigen::Index k, double epsilon,
                                 double gamma, double pinv_norm) {
    if (k < 0 || 2 * k >= n) {
        throw Error(ErrorCode::TooManyActive, "need k < n/2, got k = " + std::to_string(k) +
                                                  ", n = " + std::to_string(n));
    }
    if (epsilon < 0.0 || !(gamma > 0.0) || pinv_norm < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "epsilon and the norm must be non-negative, gamma positive");
    }
    return static_cast<double>(m) * gamma * epsilon * pinv_norm / static_cast<double>(n - 2 * k);
}

double suggest_sigma_floor_noisy(const Matrix& a, Eigen::Index k, double epsilon, double gamma) {
    if (2 * k >= a.rows()) {
        throw Error(ErrorCode::TooManyActive, "need k < n/2");
    }
    return suggest_sigma_floor_noisy(a.cols(), a.rows(), k, epsilon, gamma, pseudo_inverse_norm(a));
}

double noisy_accuracy_constant(const Matrix& a, Eigen::Index k) {
    const Eigen::Index n = a.rows();
    const double m = static_cast<double>(a.cols());
    if (2 * k >= n) throw Error(ErrorCode::TooManyActive, "need k < n/2");
    const double M = compute_M(a);
    const double lead = kGaussianGamma * m * m * std::sqrt(2.0 * std::log(m)) * pseudo_inverse_norm(a) /
                        static_cast<double>(n - 2 * k);
    return (lead + 1.0) * (M + 1.0);
}

ErrorBound error_upper_bound(const Matrix& a, const Vector& s_hat) {
    if (s_hat.size() != a.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "estimate length does not match A");
    }
    const auto n = a.rows();
    const auto m = a.cols();
    std::vector<double> mags(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) mags[static_cast<std::size_t>(i)] = std::abs(s_hat[i]);
    const auto rank = static_cast<std::size_t>(n / 2);
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(rank), mags.end(),
                     std::greater<>());
    ErrorBound out;
    out.alpha = mags[rank];
    out.M = compute_M(a);
    out.bound = (out.M + 1.0) * static_cast<double>(m) * out.alpha;
    return out;
}

double gaussian_error_bound(double M, Eigen::Index m, double sigma) {
    const double md = static_cast<double>(m);
    return (M + 1.0) * md * sigma * std::sqrt(2.0 * std::log(md));
}

Vector irls_solve(const ProjectorFactor& p, const Vector& x, const IrlsConfig& cfg) {
    if (cfg.iterations < 0 || cfg.regularizer < 0.0 || cfg.p_norm > 2.0) {
        throw Error(ErrorCode::InvalidArgument, "invalid IRLS parameters");
    }
    if (x.size() != p.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "right-hand side length does not match A");
    }
    require_finite(x, "right-hand side");
    if (x.isZero(0.0)) return Vector::Zero(p.cols());

    const Matrix& a = p.matrix();
    Vector s = p.apply(x);
    Vector w(s.size());
    Matrix scaled(a.rows(), a.cols());
    Matrix gram(a.rows(), a.rows());
    for (int it = 0; it < cfg.iterations; ++it) {
        w = s.cwiseAbs().array().pow(2.0 - cfg.p_norm).matrix().array() + cfg.regularizer;
        scaled = a * w.cwiseSqrt().asDiagonal();
        gram.setZero();
        gram.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
        const Eigen::LDLT<Matrix> ldlt(gram.selfadjointView<Eigen::Lower>());
        if (ldlt.info() != Eigen::Success) break;
        Vector next = w.cwiseProduct(a.transpose() * ldlt.solve(x));
        if (!next.allFinite()) break;
        s = std::move(next);
    }
    return p.project(s, x);
}

Vector irls_solve(const Matrix& a, const Vector& x, const IrlsConfig& cfg) {
    return irls_solve(ProjectorFactor(a), x, cfg);
}

}  // namespace sl0
