#pragma once

#include "sl0/linalg.hpp"
#include "sl0/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sl0 {

/// Seedable 64-bit generator (mt19937_64). Gaussian draws use the Box-Muller
/// transform on 53-bit uniforms so streams are identical across standard
/// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Independent child stream derived from this generator's seed.
    Rng split(std::uint64_t stream) const;

    std::uint64_t next_u64() { return engine_(); }
    double uniform();  // [0, 1)
    double normal();   // N(0, 1)
    std::uint64_t below(std::uint64_t bound);  // uniform in [0, bound)

    std::uint64_t seed() const { return seed_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    std::optional<double> spare_;
};

/// splitmix64 finalizer of seed combined with stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Bernoulli-Gaussian sources: s_i ~ p N(0, sigma_on^2) + (1-p) N(0, sigma_off^2).
/// With exact_k set, exactly that many uniformly chosen entries are active.
struct SourceModel {
    Eigen::Index m = 1000;
    double p = 0.1;
    std::optional<Eigen::Index> exact_k;
    double sigma_on = 1.0;
    double sigma_off = 0.0;

    void validate() const;
};

struct MixingSpec {
    Eigen::Index n = 400;
    Eigen::Index m = 1000;
    double noise_sigma = 0.0;  // per-component standard deviation of the sensor noise
    std::uint64_t seed = 0;

    void validate() const;
};

Vector generate_sources(const SourceModel& model, std::uint64_t seed);

/// n x m matrix of i.i.d. N(0,1) entries, each column scaled to unit l2 norm.
Matrix generate_mixing(const MixingSpec& spec);

/// x = A s + noise, noise ~ N(0, noise_sigma^2 I).
Vector mix(const Matrix& a, const Vector& s, double noise_sigma, std::uint64_t seed);

struct Problem {
    Matrix a;
    Vector s;
    Vector x;
};

/// Draws A, s and the noise from three streams split off spec.seed.
Problem generate_problem(const SourceModel& model, const MixingSpec& spec);

/// Same, for T independent source columns: X = A S + N.
struct BatchProblem {
    Matrix a;
    Matrix s;
    Matrix x;
};
BatchProblem generate_batch_problem(const SourceModel& model, const MixingSpec& spec,
                                    Eigen::Index samples);

inline constexpr double kSnrCapDb = 300.0;

/// 20 log10(||s|| / ||s - s_hat||), capped at 300 dB. Throws ZeroReference if s = 0.
double snr_db(const Vector& s_true, const Vector& s_est);
/// (1/m) ||s - s_hat||^2
double mse(const Vector& s_true, const Vector& s_est);

enum class SolverKind { SL0, IRLS };
std::string_view to_string(SolverKind kind);
SolverKind parse_solver(std::string_view name);

/// One fully specified experiment configuration.
struct SweepPoint {
    Eigen::Index m = 1000;
    Eigen::Index n = 400;
    double k = 100.0;  // expected active count (p = k/m), or exact count with exact_k
    bool exact_k = false;
    double sigma_on = 1.0;
    double sigma_off = 0.0;
    double noise_sigma = 0.01;
    SolverKind solver = SolverKind::SL0;
    SolverConfig sl0;
    IrlsConfig irls;

    SourceModel source_model() const;
    MixingSpec mixing_spec(std::uint64_t seed) const;
};

/// Cartesian product of parameter axes around a base point. Empty axes keep the
/// base value. Setting any of c / sigma_min switches the solver to a geometric
/// schedule whose missing pieces come from the base schedule.
struct SweepGrid {
    SweepPoint base;
    std::vector<double> c;
    std::vector<double> sigma_min;
    std::vector<int> L;
    std::vector<double> k;
    std::vector<double> noise_sigma;
    std::vector<Eigen::Index> m;
    std::vector<Eigen::Index> n;
    std::vector<Family> family;
    std::vector<SolverKind> solver;

    /// Expansion order: solver, family, m, n, k, noise_sigma, c, sigma_min, L
    /// (last axis varies fastest).
    std::vector<SweepPoint> expand() const;
};

struct TrialResult {
    double snr_db = 0.0;
    double mse = 0.0;
    double wall_time = 0.0;
    std::size_t run_index = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
};

struct SweepRow {
    SweepPoint point;
    std::size_t runs = 0;
    std::size_t failures = 0;
    double snr_mean_db = 0.0;
    double snr_std_db = 0.0;  // sample standard deviation (n - 1)
    double snr_min_db = 0.0;
    double mse_mean = 0.0;
    double time_mean_s = 0.0;
    std::vector<TrialResult> trials;
};

/// Runs one trial: generate with seed, solve, score. Solver errors are
/// captured in the result rather than thrown.
TrialResult run_trial(const SweepPoint& point, std::uint64_t seed, std::size_t run_index);

/// `runs` trials per point with seeds base_seed + run_index. Trials run on up to
/// `jobs` threads; rows come back in point order, trials in run order.
std::vector<SweepRow> run_sweep(const std::vector<SweepPoint>& points, std::size_t runs,
                                std::uint64_t base_seed, unsigned jobs = 1);

/// Header: parameter columns, runs, snr_mean_db, snr_std_db, snr_min_db,
/// mse_mean, time_mean_s, failures.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
/// One line per trial (long format).
void write_trials_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Pearson correlation coefficient of two equally long samples.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace sl0
