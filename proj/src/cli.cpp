#include "sl0/cli.hpp"

#include "sl0/error.hpp"
#include "sl0/expgen.hpp"
#include "sl0/io.hpp"
#include "sl0/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace sl0::cli {

namespace fs = std::filesystem;

namespace {

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::NonPositiveSigma:
        case ErrorCode::TooManyActive: return kUsage;
        case ErrorCode::Parse:
        case ErrorCode::Io:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::NonFinite: return kParse;
        case ErrorCode::RankDeficient: return kRankDeficient;
        case ErrorCode::ThresholdUnreachable: return kThresholdUnreachable;
        case ErrorCode::TooLarge: return kGuardExceeded;
        default: return kFailure;
    }
}

std::string full_precision(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// Solver flags shared by `solve`, `batch` and `sweep`.
struct SolverFlags {
    std::string family = "gaussian";
    std::string sigma1 = "auto";
    double c = 0.5;
    double sigma_min = 0.01;
    std::vector<double> schedule;
    double mu = 2.5;
    int L = 3;
    std::string mode = "fixed";
    double target_F = 0.0;
    int max_inner = 1000;

    CLI::Option* sigma1_opt = nullptr;
    CLI::Option* c_opt = nullptr;
    CLI::Option* sigma_min_opt = nullptr;
    CLI::Option* target_opt = nullptr;

    void add_to(CLI::App& app, bool with_geometric_axes = true) {
        app.add_option("--family", family, "smoothing family: gaussian|triangular|hyperbolic|rational")
            ->check(CLI::IsMember({"gaussian", "triangular", "hyperbolic", "rational"}));
        sigma1_opt = app.add_option("--sigma1", sigma1,
                                    "first sigma of a geometric schedule, or 'auto' (2 max|s0|)");
        if (with_geometric_axes) {
            c_opt = app.add_option("--c", c, "geometric decrease factor in (0,1)");
            sigma_min_opt = app.add_option("--sigma-min", sigma_min, "last sigma of a geometric schedule");
        }
        app.add_option("--schedule", schedule,
                       "explicit comma separated sigma list (default 1,0.5,0.2,0.1,0.05,0.02,0.01); "
                       "overrides --sigma1/--c/--sigma-min")
            ->delimiter(',');
        app.add_option("--mu", mu, "step factor");
        if (with_geometric_axes) app.add_option("--L", L, "ascent steps per sigma (fixed mode)");
        app.add_option("--mode", mode, "inner loop stop rule: fixed|threshold")
            ->check(CLI::IsMember({"fixed", "threshold"}));
        target_opt = app.add_option("--target-F", target_F, "threshold mode target (default m - n/2)");
        app.add_option("--max-inner", max_inner, "threshold mode step limit per sigma");
    }

    bool wants_geometric() const {
        return (sigma1_opt && sigma1_opt->count()) || (c_opt && c_opt->count()) ||
               (sigma_min_opt && sigma_min_opt->count());
    }

    SolverConfig config() const {
        SolverConfig cfg;
        cfg.family = parse_family(family);
        cfg.mu = mu;
        cfg.L = L;
        cfg.mode = mode == "threshold" ? StopMode::ThresholdF : StopMode::FixedL;
        cfg.max_inner = max_inner;
        if (target_opt && target_opt->count()) cfg.target_F = target_F;
        if (!schedule.empty()) {
            cfg.schedule = SigmaSchedule(schedule);
        } else if (wants_geometric()) {
            GeometricSchedule g;
            g.c = c;
            g.sigma_min = sigma_min;
            if (sigma1 != "auto") {
                try {
                    g.sigma1 = std::stod(sigma1);
                } catch (const std::exception&) {
                    throw Error(ErrorCode::InvalidArgument, "--sigma1 must be a number or 'auto'");
                }
            }
            cfg.schedule = g;
        }
        cfg.validate();
        return cfg;
    }
};

std::string report_csv(const SolveReport& report) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "sigma,F,residual,inner_iters,wall_time_s\n";
    int total_inner = 0;
    for (const auto& e : report.trace) {
        os << e.sigma << ',' << e.F << ',' << e.residual << ',' << e.inner_iterations << ",\n";
        total_inner += e.inner_iterations;
    }
    const double final_F = report.trace.empty() ? 0.0 : report.trace.back().F;
    const double final_res = report.trace.empty() ? 0.0 : report.trace.back().residual;
    os << "summary," << final_F << ',' << final_res << ',' << total_inner << ',' << report.wall_time
       << '\n';
    return os.str();
}

struct GenFlags {
    Eigen::Index m = 1000;
    Eigen::Index n = 400;
    double k = 100.0;
    double p = 0.1;
    Eigen::Index exact_k = 0;
    double sigma_on = 1.0;
    double sigma_off = 0.0;
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;
    Eigen::Index samples = 1;
    std::string out_dir = ".";
    CLI::Option* k_opt = nullptr;
    CLI::Option* p_opt = nullptr;
    CLI::Option* exact_opt = nullptr;
};

int cmd_gen(const GenFlags& f, std::ostream& out) {
    SourceModel model;
    model.m = f.m;
    model.sigma_on = f.sigma_on;
    model.sigma_off = f.sigma_off;
    std::string activity;
    if (f.exact_opt->count()) {
        model.exact_k = f.exact_k;
        activity = "exact_k";
    } else if (f.k_opt->count()) {
        model.p = f.k / static_cast<double>(f.m);
        activity = "k";
    } else {
        model.p = f.p;
        activity = "p";
    }
    const MixingSpec spec{f.n, f.m, f.noise_sigma, f.seed};
    model.validate();
    spec.validate();

    nlohmann::ordered_json params;
    params["m"] = f.m;
    params["n"] = f.n;
    if (model.exact_k) {
        params["exact_k"] = *model.exact_k;
    } else {
        params["p"] = model.p;
    }
    params["activity"] = activity;
    params["sigma_on"] = f.sigma_on;
    params["sigma_off"] = f.sigma_off;
    params["noise_sigma"] = f.noise_sigma;
    params["seed"] = f.seed;
    params["samples"] = f.samples;

    const fs::path dir(f.out_dir);
    fs::create_directories(dir);
    io::AtomicOutputs outputs;
    if (f.samples == 1) {
        const Problem prob = generate_problem(model, spec);
        outputs.add(dir / "A.mat", io::matrix_to_string(prob.a));
        outputs.add(dir / "s.vec", io::vector_to_string(prob.s));
        outputs.add(dir / "x.vec", io::vector_to_string(prob.x));
    } else {
        const BatchProblem prob = generate_batch_problem(model, spec, f.samples);
        outputs.add(dir / "A.mat", io::matrix_to_string(prob.a));
        outputs.add(dir / "S.mat", io::matrix_to_string(prob.s));
        outputs.add(dir / "X.mat", io::matrix_to_string(prob.x));
    }
    outputs.add(dir / "params.json", params.dump(2) + "\n");
    outputs.commit();
    out << "wrote " << (f.samples == 1 ? "A.mat s.vec x.vec" : "A.mat S.mat X.mat") << " to " << dir.string()
        << '\n';
    return kOk;
}

int cmd_solve(const std::string& a_path, const std::string& x_path, const std::string& out_dir,
              const SolverFlags& flags, std::ostream& out) {
    const SolverConfig cfg = flags.config();
    const Matrix a = io::read_matrix(a_path);
    const Vector x = io::read_vector(x_path);
    const SolveReport report = sl0_solve(a, x, cfg);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    io::AtomicOutputs outputs;
    outputs.add(dir / "s_hat.vec", io::vector_to_string(report.estimate));
    outputs.add(dir / "report.csv", report_csv(report));
    outputs.commit();
    const double final_F = report.trace.empty() ? static_cast<double>(a.cols()) : report.trace.back().F;
    out << "levels " << report.trace.size() << ", final F " << full_precision(final_F) << ", wall "
        << report.wall_time << " s\n";
    return kOk;
}

int cmd_batch(const std::string& a_path, const std::string& x_path, const std::string& out_dir,
              const SolverFlags& flags, unsigned jobs, std::ostream& out) {
    const SolverConfig cfg = flags.config();
    const Matrix a = io::read_matrix(a_path);
    const Matrix x = io::read_matrix(x_path);
    const auto reports = sl0_solve_batch(a, x, cfg, jobs);

    Matrix s_hat(a.cols(), x.cols());
    std::ostringstream csv;
    csv << std::setprecision(17) << "column,final_sigma,F,residual,inner_iters,wall_time_s\n";
    for (std::size_t t = 0; t < reports.size(); ++t) {
        const auto& r = reports[t];
        s_hat.col(static_cast<Eigen::Index>(t)) = r.estimate;
        int inner = 0;
        for (const auto& e : r.trace) inner += e.inner_iterations;
        const double sigma = r.trace.empty() ? 0.0 : r.trace.back().sigma;
        const double F = r.trace.empty() ? static_cast<double>(a.cols()) : r.trace.back().F;
        const double res = r.trace.empty() ? 0.0 : r.trace.back().residual;
        csv << t << ',' << sigma << ',' << F << ',' << res << ',' << inner << ',' << r.wall_time << '\n';
    }
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    io::AtomicOutputs outputs;
    outputs.add(dir / "S_hat.mat", io::matrix_to_string(s_hat));
    outputs.add(dir / "batch_report.csv", csv.str());
    outputs.commit();
    const double per = reports.empty() ? 0.0 : reports.front().wall_time;
    out << "solved " << reports.size() << " columns, " << per << " s per column\n";
    return kOk;
}

struct SweepFlags {
    std::vector<Eigen::Index> m{1000};
    std::vector<Eigen::Index> n{400};
    std::vector<double> k{100.0};
    std::vector<double> c;
    std::vector<double> sigma_min;
    std::vector<int> L{3};
    std::vector<double> noise_sigma{0.01};
    std::vector<std::string> family{"gaussian"};
    std::vector<std::string> solver{"sl0"};
    bool exact_k = false;
    double sigma_on = 1.0;
    double sigma_off = 0.0;
    double irls_p = 0.0;
    int irls_iterations = 50;
    double irls_regularizer = 1e-8;
    std::size_t runs = 20;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::string out_path = "-";
    std::string trials_path;
};

int cmd_sweep(const SweepFlags& f, const SolverFlags& solver_flags, std::ostream& out) {
    SweepGrid grid;
    grid.base.sl0 = solver_flags.config();
    grid.base.exact_k = f.exact_k;
    grid.base.sigma_on = f.sigma_on;
    grid.base.sigma_off = f.sigma_off;
    grid.base.irls = IrlsConfig{f.irls_p, f.irls_iterations, f.irls_regularizer};
    grid.m = f.m;
    grid.n = f.n;
    grid.k = f.k;
    grid.c = f.c;
    grid.sigma_min = f.sigma_min;
    grid.L = f.L;
    grid.noise_sigma = f.noise_sigma;
    for (const auto& name : f.family) grid.family.push_back(parse_family(name));
    for (const auto& name : f.solver) grid.solver.push_back(parse_solver(name));
    if (f.runs < 1) throw Error(ErrorCode::InvalidArgument, "--runs must be at least 1");

    const auto points = grid.expand();
    const auto rows = run_sweep(points, f.runs, f.seed, f.jobs);

    std::ostringstream table;
    write_sweep_csv(table, rows);
    io::AtomicOutputs outputs;
    if (!f.trials_path.empty()) {
        std::ostringstream trials;
        write_trials_csv(trials, rows);
        outputs.add(f.trials_path, trials.str());
    }
    if (f.out_path == "-") {
        out << table.str();
    } else {
        outputs.add(f.out_path, table.str());
    }
    outputs.commit();
    return kOk;
}

int cmd_bound(const std::string& a_path, const std::string& s_path, std::ostream& out) {
    const Matrix a = io::read_matrix(a_path);
    const Vector s_hat = io::read_vector(s_path);
    const ErrorBound b = error_upper_bound(a, s_hat);
    out << "alpha " << full_precision(b.alpha) << '\n'
        << "M " << full_precision(b.M) << '\n'
        << "bound " << full_precision(b.bound) << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse solutions of underdetermined linear systems by smoothed l0 minimization",
                 "sl0"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::uint64_t default_seed = 0;
    if (const char* env = std::getenv("SL0_SEED")) {
        try {
            default_seed = std::stoull(env);
        } catch (const std::exception&) {
            err << "error: SL0_SEED must be an unsigned integer\n";
            return kUsage;
        }
    }

    // gen
    GenFlags gen;
    gen.seed = default_seed;
    auto* gen_cmd = app.add_subcommand("gen", "generate a random problem (A, s, x)");
    gen_cmd->add_option("--m", gen.m, "number of sources (columns of A)");
    gen_cmd->add_option("--n", gen.n, "number of mixtures (rows of A)");
    gen.k_opt = gen_cmd->add_option("--k", gen.k, "expected number of active sources (p = k/m)");
    gen.p_opt = gen_cmd->add_option("--p", gen.p, "activity probability");
    gen.exact_opt = gen_cmd->add_option("--exact-k", gen.exact_k, "activate exactly this many sources");
    gen.k_opt->excludes(gen.p_opt)->excludes(gen.exact_opt);
    gen.p_opt->excludes(gen.exact_opt);
    gen_cmd->add_option("--sigma-on", gen.sigma_on, "std of active sources");
    gen_cmd->add_option("--sigma-off", gen.sigma_off, "std of inactive sources");
    gen_cmd->add_option("--noise-sigma", gen.noise_sigma, "std of additive sensor noise");
    gen_cmd->add_option("--seed", gen.seed, "random seed (default from SL0_SEED)");
    gen_cmd->add_option("--samples", gen.samples, "number of columns T; T > 1 writes S.mat/X.mat")
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--out-dir", gen.out_dir, "output directory");

    // solve
    std::string solve_a, solve_x, solve_out = ".";
    SolverFlags solve_flags;
    auto* solve_cmd = app.add_subcommand("solve", "recover a sparse solution of A s = x");
    solve_cmd->add_option("--A", solve_a, "matrix file")->required();
    solve_cmd->add_option("--x", solve_x, "right-hand side file")->required();
    solve_cmd->add_option("--out-dir", solve_out, "directory for s_hat.vec and report.csv");
    solve_flags.add_to(*solve_cmd);

    // batch
    std::string batch_a, batch_x, batch_out = ".";
    unsigned batch_jobs = 1;
    SolverFlags batch_flags;
    auto* batch_cmd = app.add_subcommand("batch", "solve A S = X for every column of X at once");
    batch_cmd->add_option("--A", batch_a, "matrix file")->required();
    batch_cmd->add_option("--X", batch_x, "n x T mixture matrix file")->required();
    batch_cmd->add_option("--out-dir", batch_out, "directory for S_hat.mat and batch_report.csv");
    batch_cmd->add_option("--jobs", batch_jobs, "worker threads");
    batch_flags.add_to(*batch_cmd);

    // sweep
    SweepFlags sweep;
    sweep.seed = default_seed;
    SolverFlags sweep_flags;
    auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo parameter sweep, CSV output");
    sweep_cmd->add_option("--m", sweep.m, "source counts")->delimiter(',');
    sweep_cmd->add_option("--n", sweep.n, "mixture counts")->delimiter(',');
    sweep_cmd->add_option("--k", sweep.k, "active source counts")->delimiter(',');
    sweep_cmd->add_option("--c", sweep.c, "geometric decrease factors")->delimiter(',');
    sweep_cmd->add_option("--sigma-min", sweep.sigma_min, "final sigma values")->delimiter(',');
    sweep_cmd->add_option("--L", sweep.L, "ascent steps per sigma")->delimiter(',');
    sweep_cmd->add_option("--noise-sigma", sweep.noise_sigma, "sensor noise std values")->delimiter(',');
    sweep_cmd->add_option("--families", sweep.family, "smoothing families")->delimiter(',');
    sweep_cmd->add_option("--solver", sweep.solver, "solvers: sl0,irls")->delimiter(',');
    sweep_cmd->add_flag("--exact-k", sweep.exact_k, "activate exactly k sources per trial");
    sweep_cmd->add_option("--sigma-on", sweep.sigma_on, "std of active sources");
    sweep_cmd->add_option("--sigma-off", sweep.sigma_off, "std of inactive sources");
    sweep_cmd->add_option("--irls-p", sweep.irls_p, "IRLS p-norm");
    sweep_cmd->add_option("--irls-iterations", sweep.irls_iterations, "IRLS iterations");
    sweep_cmd->add_option("--irls-regularizer", sweep.irls_regularizer, "IRLS weight floor");
    sweep_cmd->add_option("--runs", sweep.runs, "trials per grid point");
    sweep_cmd->add_option("--seed", sweep.seed, "base seed; trial r uses seed + r");
    sweep_cmd->add_option("--jobs", sweep.jobs, "worker threads");
    sweep_cmd->add_option("--out", sweep.out_path, "summary CSV path, '-' for stdout");
    sweep_cmd->add_option("--trials-out", sweep.trials_path, "per-trial long-format CSV path");
    sweep_flags.add_to(*sweep_cmd, false);

    // bound
    std::string bound_a, bound_s;
    auto* bound_cmd = app.add_subcommand("bound", "a-posteriori error bound (small systems only)");
    bound_cmd->add_option("--A", bound_a, "matrix file")->required();
    bound_cmd->add_option("--s-hat", bound_s, "estimate file")->required();

    std::vector<const char*> argv;
    argv.push_back("sl0");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help on a subcommand
            for (auto* sub : app.get_subcommands()) out << sub->help();
            if (app.get_subcommands().empty()) out << app.help();
            return kOk;
        }
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen(gen, out);
        if (solve_cmd->parsed()) return cmd_solve(solve_a, solve_x, solve_out, solve_flags, out);
        if (batch_cmd->parsed()) return cmd_batch(batch_a, batch_x, batch_out, batch_flags, batch_jobs, out);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep, sweep_flags, out);
        if (bound_cmd->parsed()) return cmd_bound(bound_a, bound_s, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        if (e.code() == ErrorCode::TooLarge) {
            err << "note: bounds need an exhaustive search; the guard allows at most "
                << kMaxCombinatorialCols << " columns and " << kMaxEnumerations << " submatrices\n";
        }
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}

}  // namespace sl0::cli
