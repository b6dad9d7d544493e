#pragma once

// ROM quality metrics and the experiment driver.
//
// The error measure is the relative L2(x)L2 norm over absolute (steady
// recentered) outputs; the MORscore of an error curve over orders 1..r_max
// is the mean of the clamped log-normalized accuracies
//   yhat(r) = clamp(log10 e(r) / log10 eps, 0, 1).

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "gasnet/reductors.hpp"

namespace gasnet {

/// Relative L2(x)L2 distance between two sampled output trajectories.
inline double l2l2_error(const Eigen::MatrixXd& y_ref, const Eigen::MatrixXd& y_test, double dt) {
    if (y_ref.rows() != y_test.rows() || y_ref.cols() != y_test.cols())
        throw ValidationError("l2l2_error: mismatched sampling grids");
    double num = 0.0, den = 0.0;
    for (Eigen::Index k = 0; k < y_ref.cols(); ++k) {
        num += dt * (y_ref.col(k) - y_test.col(k)).squaredNorm();
        den += dt * y_ref.col(k).squaredNorm();
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num) / std::sqrt(den);
}

struct ErrorCurve {
    std::vector<int> orders;     // attempted reduced orders (ascending)
    std::vector<double> errors;  // e(r); infinity for failed/unstable ROMs
    std::vector<bool> failed;
};

/// Normalized accuracy of one error value in [0, 1].
inline double morscore_accuracy(double error, double eps) {
    if (!std::isfinite(error) || error >= 1.0) return 0.0;
    if (error <= eps) return 1.0;
    return std::log10(error) / std::log10(eps);
}

/// MORscore mu(r_max, eps): mean normalized accuracy over the curve.
inline double morscore(const ErrorCurve& curve, double eps, int r_max) {
    if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("morscore requires eps in (0,1)");
    if (curve.orders.empty()) return 0.0;
    double acc = 0.0;
    int counted = 0;
    for (size_t i = 0; i < curve.orders.size(); ++i) {
        if (curve.orders[i] > r_max) break;
        acc += morscore_accuracy(curve.errors[i], eps);
        ++counted;
    }
    return counted ? acc / double(counted) : 0.0;
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct SweepOptions {
    int r_max = 100;
    int stride = 1;
    bool gain_matching = false;
    int eps_digits = 16;  // eps = 10^-digits
    int jobs = 1;
    double training_perturbation = 0.01;
    std::string scenario_hash;  // provenance carried into reports

    double eps() const { return std::pow(10.0, -eps_digits); }
};

struct EvaluationReport {
    std::string reductor;
    std::string solver;
    std::string model_id;
    std::string scenario_hash;
    ErrorCurve curve;
    std::vector<double> gain_errors;  // mean |D| entries per order
    double score = 0.0;               // MORscore
    double avg_gain_error = 0.0;
    double train_seconds = 0.0;
    double sim_seconds = 0.0;
    int r_max = 0;
    int eps_digits = 16;
    bool gain_matching = false;
};

namespace detail {

inline Eigen::MatrixXd absolute_outputs(const Trajectory& tr, const Eigen::VectorXd& ybar) {
    return tr.outputs.colwise() + ybar;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Projects, gain-matches (optionally) and scores ROMs of orders
/// 1..min(r_max, basis width) against the full model on one scenario.
/// The snapshot set is trained once by the caller and shared across
/// reductors; `train_seconds` accounts for that shared cost.
inline EvaluationReport sweep(const SemiDiscreteModel& model, const std::string& solver_id,
                              const std::string& reductor_id, const Scenario& scenario,
                              const SnapshotSet& snapshots, const SweepOptions& opts,
                              double snapshot_seconds = 0.0,
                              const Trajectory* fom_reference = nullptr) {
    if (!model.steadied()) throw ValidationError("sweep requires a steadied model");
    const Stepper stepper = make_stepper(solver_id);
    const double dt = scenario.dt_hint;
    const InputSignal u = make_input(model, scenario);

    EvaluationReport rep;
    rep.reductor = reductor_id;
    rep.solver = solver_id;
    rep.model_id = to_string(model.scheme);
    rep.r_max = opts.r_max;
    rep.eps_digits = opts.eps_digits;
    rep.gain_matching = opts.gain_matching;
    rep.scenario_hash = opts.scenario_hash;

    // full-order reference (absolute outputs)
    Trajectory fom_local;
    if (!fom_reference) fom_local = integrate(model.sys, stepper, u, scenario.horizon, dt);
    const Trajectory& fom = fom_reference ? *fom_reference : fom_local;
    const Eigen::MatrixXd y_fom = detail::absolute_outputs(fom, model.ybar);

    auto t_train = std::chrono::steady_clock::now();
    const int width = std::min<int>(opts.r_max, int(model.order()));
    std::string warning;
    const Eigen::MatrixXd basis = train_basis(reductor_id, snapshots, model.sys.C, width, &warning);
    rep.train_seconds = snapshot_seconds + detail::seconds_since(t_train);

    // the grid always spans 1..min(r_max, n); orders beyond the trained
    // basis width count as failures rather than shrinking the denominator
    std::vector<int> orders;
    for (int r = 1; r <= width; r += opts.stride) orders.push_back(r);

    const size_t count = orders.size();
    rep.curve.orders = orders;
    rep.curve.errors.assign(count, std::numeric_limits<double>::infinity());
    rep.curve.failed.assign(count, false);
    rep.gain_errors.assign(count, 0.0);

    auto t_sim = std::chrono::steady_clock::now();
    parallel_for(int(count), opts.jobs, [&](int i) {
        const int r = orders[size_t(i)];
        if (r > int(basis.cols())) {
            rep.curve.failed[size_t(i)] = true;
            return;
        }
        RomProvenance prov{reductor_id, solver_id, rep.scenario_hash, r};
        try {
            ReducedOrderModel rom = galerkin_project(model.sys, basis.leftCols(r), prov);
            GainMismatch gm = gain_mismatch(model.sys, rom.sys);
            rep.gain_errors[size_t(i)] = gm.mean_abs;
            if (opts.gain_matching) rom = apply_gain_matching(rom, gm.D);
            Trajectory tr = integrate(rom.sys, stepper, u, scenario.horizon, dt);
            Eigen::MatrixXd y_rom = detail::absolute_outputs(tr, model.ybar);
            if (!y_rom.allFinite()) throw NumericalError("non-finite ROM outputs");
            rep.curve.errors[size_t(i)] = l2l2_error(y_fom, y_rom, dt);
        } catch (const NumericalError&) {
            rep.curve.failed[size_t(i)] = true;  // keeps e = infinity
        }
    });
    rep.sim_seconds = detail::seconds_since(t_sim);

    rep.score = morscore(rep.curve, opts.eps(), opts.r_max);
    double acc = 0.0;
    for (double g : rep.gain_errors) acc += g;
    rep.avg_gain_error = count ? acc / double(count) : 0.0;
    return rep;
}

/// Convenience overload: trains its own snapshot set.
inline EvaluationReport sweep(const SemiDiscreteModel& model, const std::string& solver_id,
                              const std::string& reductor_id, const Scenario& scenario,
                              const SweepOptions& opts) {
    TrainingSpec spec;
    spec.horizon = scenario.horizon;
    spec.dt = scenario.dt_hint;
    spec.perturbation = opts.training_perturbation;
    spec.jobs = opts.jobs;
    auto t0 = std::chrono::steady_clock::now();
    SnapshotSet snaps = collect_snapshots(model, solver_id, spec);
    return sweep(model, solver_id, reductor_id, scenario, snaps, opts,
                 detail::seconds_since(t0));
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct ComparisonRow {
    std::string reductor;
    double score = 0.0;
    double avg_gain_error = 0.0;
};

/// Ranking by MORscore (descending), ties by mean gain error (ascending).
inline std::vector<ComparisonRow> compare(const std::vector<EvaluationReport>& reports) {
    if (reports.empty()) return {};
    for (const auto& r : reports)
        if (r.r_max != reports.front().r_max || r.eps_digits != reports.front().eps_digits ||
            r.scenario_hash != reports.front().scenario_hash)
            throw ValidationError("inconsistent sweep parameters across reports");
    std::vector<ComparisonRow> rows;
    for (const auto& r : reports) rows.push_back({r.reductor, r.score, r.avg_gain_error});
    std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.avg_gain_error < b.avg_gain_error;
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

inline void write_report_csv(std::ostream& os, const EvaluationReport& rep) {
    os << "# solver=" << rep.solver << " model=" << rep.model_id
       << " scenario_hash=" << rep.scenario_hash << " r_max=" << rep.r_max
       << " eps_digits=" << rep.eps_digits << " gain_matching=" << (rep.gain_matching ? 1 : 0)
       << " morscore=" << csv::format_double(rep.score)
       << " train_s=" << csv::format_double(rep.train_seconds)
       << " sim_s=" << csv::format_double(rep.sim_seconds) << "\n";
    os << "reductor,r,error,gain_error\n";
    for (size_t i = 0; i < rep.curve.orders.size(); ++i)
        os << rep.reductor << ',' << rep.curve.orders[i] << ','
           << csv::format_double(rep.curve.errors[i]) << ','
           << csv::format_double(rep.gain_errors[i]) << '\n';
}

inline EvaluationReport read_report_csv(std::istream& is) {
    EvaluationReport rep;
    for (const csv::Line& ln : csv::read_lines(is)) {
        if (ln.text[0] == '#') {
            std::istringstream meta(ln.text.substr(1));
            std::string kv;
            while (meta >> kv) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
                if (key == "solver") rep.solver = val;
                else if (key == "model") rep.model_id = val;
                else if (key == "scenario_hash") rep.scenario_hash = val;
                else if (key == "r_max") rep.r_max = std::stoi(val);
                else if (key == "eps_digits") rep.eps_digits = std::stoi(val);
                else if (key == "gain_matching") rep.gain_matching = val == "1";
                else if (key == "morscore") rep.score = std::stod(val);
                else if (key == "train_s") rep.train_seconds = std::stod(val);
                else if (key == "sim_s") rep.sim_seconds = std::stod(val);
            }
            continue;
        }
        if (ln.text.rfind("reductor,", 0) == 0) continue;
        auto f = csv::split(ln.text);
        if (f.size() != 4) throw ParseError("expected reductor,r,error,gain_error", ln.number);
        rep.reductor = f[0];
        rep.curve.orders.push_back(int(csv::parse_double(f[1], ln.number, 2)));
        double e = csv::parse_double(f[2], ln.number, 3);
        rep.curve.errors.push_back(e);
        rep.curve.failed.push_back(!std::isfinite(e));
        rep.gain_errors.push_back(csv::parse_double(f[3], ln.number, 4));
    }
    double acc = 0.0;
    for (double g : rep.gain_errors) acc += g;
    rep.avg_gain_error = rep.gain_errors.empty() ? 0.0 : acc / double(rep.gain_errors.size());
    return rep;
}

inline void write_summary_csv(std::ostream& os, const std::vector<EvaluationReport>& reports) {
    os << "reductor,morscore,avg_gain_error,train_s,sim_s\n";
    for (const auto& r : reports)
        os << r.reductor << ',' << csv::format_double(r.score) << ','
           << csv::format_double(r.avg_gain_error) << ',' << csv::format_double(r.train_seconds)
           << ',' << csv::format_double(r.sim_seconds) << '\n';
}

}  // namespace gasnet
