#include "sl0/expgen.hpp"

#include "sl0/error.hpp"
#include "sl0/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sl0 {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

Rng Rng::split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) throw Error(ErrorCode::InvalidArgument, "empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % bound;
}

void SourceModel::validate() const {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "source count m must be positive");
    if (exact_k) {
        if (*exact_k < 0 || *exact_k > m) {
            throw Error(ErrorCode::InvalidArgument, "exact_k must lie in [0, m]");
        }
    } else if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "activity probability p must lie in [0, 1]");
    }
    if (!(sigma_on > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_on must be positive");
    if (!(sigma_off >= 0.0) || sigma_off > sigma_on) {
        throw Error(ErrorCode::InvalidArgument, "sigma_off must lie in [0, sigma_on]");
    }
}

void MixingSpec::validate() const {
    if (n < 1 || m < 1) throw Error(ErrorCode::InvalidArgument, "dimensions must be positive");
    if (n > m) throw Error(ErrorCode::InvalidArgument, "need n <= m for an underdetermined system");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be non-negative");
}

Vector generate_sources(const SourceModel& model, std::uint64_t seed) {
    model.validate();
    Rng rng(seed);
    Vector s(model.m);
    if (model.exact_k) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(model.m));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::vector<bool> active(static_cast<std::size_t>(model.m), false);
        // partial Fisher-Yates: the first exact_k slots form a uniform subset
        for (Eigen::Index i = 0; i < *model.exact_k; ++i) {
            const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(model.m - i)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
            active[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
        }
        for (Eigen::Index i = 0; i < model.m; ++i) {
            s[i] = rng.normal() * (active[static_cast<std::size_t>(i)] ? model.sigma_on : model.sigma_off);
        }
        return s;
    }
    for (Eigen::Index i = 0; i < model.m; ++i) {
        const bool on = rng.uniform() < model.p;
        s[i] = rng.normal() * (on ? model.sigma_on : model.sigma_off);
    }
    return s;
}

Matrix generate_mixing(const MixingSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Matrix a(spec.n, spec.m);
    for (Eigen::Index j = 0; j < spec.m; ++j) {
        for (Eigen::Index i = 0; i < spec.n; ++i) a(i, j) = rng.normal();
        const double norm = a.col(j).norm();
        if (norm > 0.0) a.col(j) /= norm;
    }
    return a;
}

Vector mix(const Matrix& a, const Vector& s, double noise_sigma, std::uint64_t seed) {
    if (s.size() != a.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "source length does not match A");
    }
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be non-negative");
    Vector x = a * s;
    if (noise_sigma > 0.0) {
        Rng rng(seed);
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += noise_sigma * rng.normal();
    }
    return x;
}

Problem generate_problem(const SourceModel& model, const MixingSpec& spec) {
    if (model.m != spec.m) throw Error(ErrorCode::DimensionMismatch, "source and mixing m differ");
    Problem prob;
    MixingSpec mixing = spec;
    mixing.seed = derive_seed(spec.seed, 1);
    prob.a = generate_mixing(mixing);
    prob.s = generate_sources(model, derive_seed(spec.seed, 2));
    prob.x = mix(prob.a, prob.s, spec.noise_sigma, derive_seed(spec.seed, 3));
    return prob;
}

BatchProblem generate_batch_problem(const SourceModel& model, const MixingSpec& spec,
                                    Eigen::Index samples) {
    if (model.m != spec.m) throw Error(ErrorCode::DimensionMismatch, "source and mixing m differ");
    if (samples < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be positive");
    BatchProblem prob;
    MixingSpec mixing = spec;
    mixing.seed = derive_seed(spec.seed, 1);
    prob.a = generate_mixing(mixing);
    prob.s.resize(spec.m, samples);
    prob.x.resize(spec.n, samples);
    for (Eigen::Index t = 0; t < samples; ++t) {
        // column 0 reuses the single-problem streams
        const auto tt = static_cast<std::uint64_t>(t);
        const Vector s = generate_sources(model, derive_seed(spec.seed, 2 + 2 * tt));
        prob.s.col(t) = s;
        prob.x.col(t) = mix(prob.a, s, spec.noise_sigma, derive_seed(spec.seed, 3 + 2 * tt));
    }
    return prob;
}

double snr_db(const Vector& s_true, const Vector& s_est) {
    if (s_true.size() != s_est.size()) {
        throw Error(ErrorCode::DimensionMismatch, "vectors differ in length");
    }
    const double ref = s_true.norm();
    if (!(ref > 0.0)) throw Error(ErrorCode::ZeroReference, "SNR of a zero reference is undefined");
    const double err = (s_true - s_est).norm();
    if (err == 0.0) return kSnrCapDb;
    return std::min(kSnrCapDb, 20.0 * std::log10(ref / err));
}

double mse(const Vector& s_true, const Vector& s_est) {
    if (s_true.size() != s_est.size()) {
        throw Error(ErrorCode::DimensionMismatch, "vectors differ in length");
    }
    return (s_true - s_est).squaredNorm() / static_cast<double>(s_true.size());
}

std::string_view to_string(SolverKind kind) {
    return kind == SolverKind::SL0 ? "sl0" : "irls";
}

SolverKind parse_solver(std::string_view name) {
    if (name == "sl0") return SolverKind::SL0;
    if (name == "irls") return SolverKind::IRLS;
    throw Error(ErrorCode::InvalidArgument, "unknown solver '" + std::string(name) + "'");
}

SourceModel SweepPoint::source_model() const {
    SourceModel model;
    model.m = m;
    model.sigma_on = sigma_on;
    model.sigma_off = sigma_off;
    if (exact_k) {
        model.exact_k = static_cast<Eigen::Index>(std::llround(k));
    } else {
        model.p = k / static_cast<double>(m);
    }
    return model;
}

MixingSpec SweepPoint::mixing_spec(std::uint64_t seed) const {
    return MixingSpec{n, m, noise_sigma, seed};
}

namespace {

template <class T>
std::vector<T> axis_or(const std::vector<T>& axis, T fallback) {
    return axis.empty() ? std::vector<T>{fallback} : axis;
}

}  // namespace

std::vector<SweepPoint> SweepGrid::expand() const {
    // pieces of a geometric schedule implied by the base configuration
    GeometricSchedule geo_base;
    if (const auto* fixed = std::get_if<SigmaSchedule>(&base.sl0.schedule)) {
        geo_base.sigma1 = fixed->front();
        geo_base.sigma_min = fixed->back();
    } else {
        geo_base = std::get<GeometricSchedule>(base.sl0.schedule);
    }
    const bool geometric = !c.empty() || !sigma_min.empty();

    std::vector<SweepPoint> points;
    for (SolverKind sk : axis_or(solver, base.solver))
        for (Family fam : axis_or(family, base.sl0.family))
            for (Eigen::Index mm : axis_or(m, base.m))
                for (Eigen::Index nn : axis_or(n, base.n))
                    for (double kk : axis_or(k, base.k))
                        for (double ns : axis_or(noise_sigma, base.noise_sigma))
                            for (double cc : axis_or(c, geo_base.c))
                                for (double smin : axis_or(sigma_min, geo_base.sigma_min))
                                    for (int ll : axis_or(L, base.sl0.L)) {
                                        SweepPoint p = base;
                                        p.solver = sk;
                                        p.sl0.family = fam;
                                        p.m = mm;
                                        p.n = nn;
                                        p.k = kk;
                                        p.noise_sigma = ns;
                                        p.sl0.L = ll;
                                        if (geometric) {
                                            p.sl0.schedule = GeometricSchedule{geo_base.sigma1, cc, smin};
                                        }
                                        points.push_back(std::move(p));
                                    }
    return points;
}

TrialResult run_trial(const SweepPoint& point, std::uint64_t seed, std::size_t run_index) {
    TrialResult result;
    result.run_index = run_index;
    result.seed = seed;
    try {
        const Problem prob = generate_problem(point.source_model(), point.mixing_spec(seed));
        const auto start = std::chrono::steady_clock::now();
        Vector estimate;
        if (point.solver == SolverKind::SL0) {
            estimate = sl0_solve(prob.a, prob.x, point.sl0).estimate;
        } else {
            estimate = irls_solve(prob.a, prob.x, point.irls);
        }
        result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.snr_db = snr_db(prob.s, estimate);
        result.mse = mse(prob.s, estimate);
    } catch (const Error& e) {
        result.failed = true;
        result.error = e.what();
    }
    return result;
}

std::vector<SweepRow> run_sweep(const std::vector<SweepPoint>& points, std::size_t runs,
                                std::uint64_t base_seed, unsigned jobs) {
    std::vector<SweepRow> rows(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        rows[i].point = points[i];
        rows[i].runs = runs;
        rows[i].trials.resize(runs);
    }
    parallel_for(points.size() * runs, jobs, [&](std::size_t job) {
        const std::size_t pi = job / runs;
        const std::size_t r = job % runs;
        rows[pi].trials[r] = run_trial(points[pi], base_seed + r, r);
    });

    for (auto& row : rows) {
        std::vector<double> snrs;
        double mse_sum = 0.0;
        double time_sum = 0.0;
        for (const auto& t : row.trials) {
            if (t.failed) {
                ++row.failures;
                continue;
            }
            snrs.push_back(t.snr_db);
            mse_sum += t.mse;
            time_sum += t.wall_time;
        }
        const auto ok = static_cast<double>(snrs.size());
        if (snrs.empty()) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            row.snr_mean_db = row.snr_std_db = row.snr_min_db = row.mse_mean = row.time_mean_s = nan;
            continue;
        }
        row.snr_mean_db = std::accumulate(snrs.begin(), snrs.end(), 0.0) / ok;
        double ss = 0.0;
        for (double v : snrs) ss += (v - row.snr_mean_db) * (v - row.snr_mean_db);
        row.snr_std_db = snrs.size() > 1 ? std::sqrt(ss / (ok - 1.0)) : 0.0;
        row.snr_min_db = *std::min_element(snrs.begin(), snrs.end());
        row.mse_mean = mse_sum / ok;
        row.time_mean_s = time_sum / ok;
    }
    return rows;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

void write_point_columns(std::ostream& out, const SweepPoint& p) {
    out << to_string(p.solver) << ',' << to_string(p.sl0.family) << ',' << p.m << ',' << p.n << ','
        << p.k << ',' << (p.exact_k ? 1 : 0) << ',' << p.sigma_on << ',' << p.sigma_off << ','
        << p.noise_sigma << ',';
    if (const auto* fixed = std::get_if<SigmaSchedule>(&p.sl0.schedule)) {
        out << fixed->front() << ",," << fixed->back();
    } else {
        const auto& g = std::get<GeometricSchedule>(p.sl0.schedule);
        if (g.sigma1) {
            out << *g.sigma1;
        } else {
            out << "auto";
        }
        out << ',' << g.c << ',' << g.sigma_min;
    }
    out << ',' << p.sl0.L << ',' << p.sl0.mu;
}

constexpr const char* kPointHeader =
    "solver,family,m,n,k,exact_k,sigma_on,sigma_off,noise_sigma,sigma1,c,sigma_min,L,mu";

}  // namespace

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    const auto old_precision = out.precision(17);
    out << kPointHeader << ",runs,snr_mean_db,snr_std_db,snr_min_db,mse_mean,time_mean_s,failures\n";
    for (const auto& row : rows) {
        write_point_columns(out, row.point);
        out << ',' << row.runs << ',' << row.snr_mean_db << ',' << row.snr_std_db << ','
            << row.snr_min_db << ',' << row.mse_mean << ',' << row.time_mean_s << ',' << row.failures
            << '\n';
    }
    out.precision(old_precision);
}

void write_trials_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    const auto old_precision = out.precision(17);
    out << kPointHeader << ",run_index,seed,snr_db,mse,wall_time_s,error\n";
    for (const auto& row : rows) {
        for (const auto& t : row.trials) {
            write_point_columns(out, row.point);
            out << ',' << t.run_index << ',' << t.seed << ',';
            if (t.failed) {
                out << ",,," << csv_escape(t.error);
            } else {
                out << t.snr_db << ',' << t.mse << ',' << t.wall_time << ',';
            }
            out << '\n';
        }
    }
    out.precision(old_precision);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "pearson needs two equally long samples of size >= 2");
    }
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace sl0
