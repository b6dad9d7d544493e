// gasnet command line: transient simulation, model reduction, and the
// reductor benchmark sweep on gas pipeline networks.
//
//   gasnet validate --network net.csv
//   gasnet simulate --network net.csv --scenario scn.csv [--solver imex1]
//   gasnet reduce   --network net.csv --scenario scn.csv --reductor pod_r
//   gasnet sweep    --network net.csv --scenario scn.csv --reductor a,b,c
//   gasnet compare  report_a.csv report_b.csv ...
//
// Exit codes: 0 ok, 2 usage/configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "gasnet/evaluation.hpp"
#include "gasnet/svg.hpp"

namespace fs = std::filesystem;
using namespace gasnet;

namespace {

struct Config {
    std::string network, scenario, profile;
    std::string model = "ode_end";
    std::string solver = "imex1";
    std::vector<std::string> reductors = {"eds_ro_l"};
    std::string gravity = "none";
    std::string gain_matching = "off";
    double dt = 0.0;  // 0: use the scenario hint
    double rtol = 1e-3;
    int rmax = 100;
    int eps_digits = 16;
    int jobs = 1;
    std::string out = "out";
};

std::string slurp(const std::string& path, const char* what) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError(std::string(what) + " file not found: '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Network load_network(const Config& cfg) {
    if (cfg.network.empty()) throw ValidationError("--network is required");
    Network net = parse_network(slurp(cfg.network, "network"));
    if (!cfg.profile.empty()) {
        std::istringstream is(slurp(cfg.profile, "profile"));
        net = apply_height_profiles(net, parse_height_profiles(is));
    }
    return net;
}

struct LoadedScenario {
    Scenario scenario;
    std::string hash;
};

LoadedScenario load_scenario(const Config& cfg, const Network& net) {
    if (cfg.scenario.empty()) throw ValidationError("--scenario is required");
    std::string text = slurp(cfg.scenario, "scenario");
    LoadedScenario ls{parse_scenario(text, net), csv::hash_hex(csv::fnv1a(text))};
    if (cfg.dt > 0.0) ls.scenario.dt_hint = cfg.dt;
    return ls;
}

SemiDiscreteModel build_model(const Config& cfg, const Network& net, const Scenario& sc) {
    auto model = assemble(net, GasConstants{}, scheme_from_string(cfg.model),
                          gravity_from_string(cfg.gravity));
    return steady_state(model, sc).first;
}

void write_trajectory_csv(const fs::path& path, const SemiDiscreteModel& model,
                          const Trajectory& tr) {
    std::ofstream os(path);
    os << "t";
    for (const auto& name : model.output_names()) os << ',' << name;
    os << '\n';
    for (Eigen::Index k = 0; k < tr.samples(); ++k) {
        os << csv::format_double(tr.times[k]);
        for (Eigen::Index i = 0; i < tr.outputs.rows(); ++i)
            os << ',' << csv::format_double(tr.outputs(i, k) + model.ybar[i]);
        os << '\n';
    }
}

void write_scenario_svg(const fs::path& path, const Scenario& sc) {
    std::vector<double> ts;
    for (double t = 0.0; t <= sc.horizon + 1e-9; t += sc.horizon / 240.0) ts.push_back(t);
    auto sample = [&](const Series& s, double scale) {
        std::vector<double> vs;
        vs.reserve(ts.size());
        for (double t : ts) vs.push_back(s.eval(t) * scale);
        return vs;
    };
    svg::LineChart top;
    top.title = "Supply pressure";
    top.xlabel = "t [s]";
    top.ylabel = "p [bar]";
    for (size_t i = 0; i < sc.supply_ports.size(); ++i)
        top.add(sc.supply_ports[i], ts, sample(sc.supply_pressure[i], 1e-5));
    svg::LineChart bottom;
    bottom.title = "Demand mass flux";
    bottom.xlabel = "t [s]";
    bottom.ylabel = "q [kg/s]";
    for (size_t i = 0; i < sc.demand_ports.size(); ++i)
        bottom.add(sc.demand_ports[i], ts, sample(sc.demand_flux[i], 1.0));
    svg::write_charts(path.string(), {top, bottom});
}

void write_error_svg(const fs::path& path, const std::vector<EvaluationReport>& reports) {
    svg::LineChart chart;
    chart.title = "Relative L2(x)L2 output error vs reduced order";
    chart.xlabel = "reduced order r";
    chart.ylabel = "relative error";
    chart.log_y = true;
    for (const auto& rep : reports) {
        std::vector<double> xs(rep.curve.orders.begin(), rep.curve.orders.end());
        chart.add(rep.reductor, xs, rep.curve.errors);
    }
    svg::write_chart(path.string(), chart);
}

int cmd_validate(const Config& cfg) {
    Network net = cfg.profile.empty()
                      ? parse_network(slurp(cfg.network, "network"))
                      : load_network(cfg);
    NetworkDiagnostics diag = validate(net);
    std::cout << "check,status,detail\n";
    for (const auto& e : diag.entries)
        std::cout << e.check << ',' << (e.passed ? "pass" : "FAIL") << ',' << e.detail << '\n';
    std::cout << "nodes,info," << diag.node_count << '\n'
              << "pipes,info," << diag.pipe_count << '\n'
              << "supply_ports,info," << diag.supply_count << '\n'
              << "demand_ports,info," << diag.demand_count << '\n'
              << "tree,info," << (diag.tree ? "yes" : "no") << '\n';
    return diag.ok() ? 0 : 2;
}

int cmd_simulate(const Config& cfg) {
    Network net = load_network(cfg);
    LoadedScenario ls = load_scenario(cfg, net);
    SemiDiscreteModel model = build_model(cfg, net, ls.scenario);

    IntegrateOptions opts;
    opts.rtol = cfg.rtol;
    Trajectory tr = integrate(model.sys, make_stepper(cfg.solver), make_input(model, ls.scenario),
                              ls.scenario.horizon, ls.scenario.dt_hint, opts);
    if (!tr.outputs.allFinite()) throw NumericalError("simulation produced non-finite outputs");

    fs::create_directories(cfg.out);
    write_trajectory_csv(fs::path(cfg.out) / "trajectory.csv", model, tr);
    write_scenario_svg(fs::path(cfg.out) / "scenario.svg", ls.scenario);
    std::ofstream summary(fs::path(cfg.out) / "model_summary.csv");
    write_model_summary(summary, model);
    std::cout << "wrote " << (fs::path(cfg.out) / "trajectory.csv").string() << " ("
              << tr.samples() << " samples, " << tr.outputs.rows() << " ports)\n";
    return 0;
}

int cmd_reduce(const Config& cfg) {
    Network net = load_network(cfg);
    LoadedScenario ls = load_scenario(cfg, net);
    SemiDiscreteModel model = build_model(cfg, net, ls.scenario);

    TrainingSpec spec;
    spec.horizon = ls.scenario.horizon;
    spec.dt = ls.scenario.dt_hint;
    spec.jobs = cfg.jobs;
    SnapshotSet snaps = collect_snapshots(model, cfg.solver, spec);

    fs::create_directories(cfg.out);
    for (const auto& reductor : cfg.reductors) {
        int width = std::min<int>(cfg.rmax, int(model.order()));
        if (width < cfg.rmax)
            std::cerr << "note: rmax " << cfg.rmax << " clipped to state dimension " << width
                      << '\n';
        std::string warning;
        Eigen::MatrixXd basis = train_basis(reductor, snaps, model.sys.C, width, &warning);
        if (!warning.empty()) std::cerr << "note: " << warning << '\n';

        RomProvenance prov{reductor, cfg.solver, ls.hash, int(basis.cols())};
        ReducedOrderModel rom = galerkin_project(model.sys, basis, prov);
        if (cfg.gain_matching == "on")
            rom = apply_gain_matching(rom, gain_mismatch(model.sys, rom.sys).D);
        fs::path dir = fs::path(cfg.out) / ("rom_" + reductor);
        save_rom(dir, rom, cfg.model, cfg.gravity);
        std::cout << "wrote " << dir.string() << " (order " << rom.provenance.r << ")\n";
    }
    return 0;
}

int cmd_sweep(const Config& cfg) {
    Network net = load_network(cfg);
    LoadedScenario ls = load_scenario(cfg, net);
    SemiDiscreteModel model = build_model(cfg, net, ls.scenario);

    SweepOptions opts;
    opts.r_max = cfg.rmax;
    opts.gain_matching = cfg.gain_matching == "on";
    opts.eps_digits = cfg.eps_digits;
    opts.jobs = cfg.jobs;
    opts.scenario_hash = ls.hash;

    TrainingSpec spec;
    spec.horizon = ls.scenario.horizon;
    spec.dt = ls.scenario.dt_hint;
    spec.jobs = cfg.jobs;
    auto t0 = std::chrono::steady_clock::now();
    SnapshotSet snaps = collect_snapshots(model, cfg.solver, spec);
    double snap_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Trajectory fom = integrate(model.sys, make_stepper(cfg.solver), make_input(model, ls.scenario),
                               ls.scenario.horizon, ls.scenario.dt_hint);

    fs::create_directories(cfg.out);
    std::vector<EvaluationReport> reports;
    for (const auto& reductor : cfg.reductors) {
        EvaluationReport rep =
            sweep(model, cfg.solver, reductor, ls.scenario, snaps, opts, snap_seconds, &fom);
        std::ofstream os(fs::path(cfg.out) / ("report_" + reductor + ".csv"));
        write_report_csv(os, rep);
        std::cout << reductor << ": morscore " << rep.score << ", avg gain error "
                  << rep.avg_gain_error << '\n';
        reports.push_back(std::move(rep));
    }

    std::ofstream summary(fs::path(cfg.out) / "summary.csv");
    write_summary_csv(summary, reports);
    write_error_svg(fs::path(cfg.out) / "errors.svg", reports);
    write_scenario_svg(fs::path(cfg.out) / "scenario.svg", ls.scenario);
    return 0;
}

int cmd_compare(const Config& cfg, const std::vector<std::string>& files) {
    if (files.empty()) throw ValidationError("compare requires report files");
    std::vector<EvaluationReport> reports;
    for (const auto& f : files) {
        std::istringstream is(slurp(f, "report"));
        reports.push_back(read_report_csv(is));
        double eps = std::pow(10.0, -reports.back().eps_digits);
        reports.back().score = morscore(reports.back().curve, eps, reports.back().r_max);
    }
    auto rows = compare(reports);

    fs::create_directories(cfg.out);
    std::ofstream os(fs::path(cfg.out) / "ranking.csv");
    os << "rank,reductor,morscore,avg_gain_error\n";
    std::cout << "rank,reductor,morscore,avg_gain_error\n";
    for (size_t i = 0; i < rows.size(); ++i) {
        std::ostringstream line;
        line << (i + 1) << ',' << rows[i].reductor << ',' << csv::format_double(rows[i].score)
             << ',' << csv::format_double(rows[i].avg_gain_error);
        os << line.str() << '\n';
        std::cout << line.str() << '\n';
    }
    write_error_svg(fs::path(cfg.out) / "errors.svg", reports);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Config cfg;
    std::vector<std::string> compare_files;

    CLI::App app{"gas network transient simulation and model (order) reduction workbench"};
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--network", cfg.network, "network file (*.net.csv)");
    app.add_option("--scenario", cfg.scenario, "scenario file (*.scn.csv)");
    app.add_option("--profile", cfg.profile, "height profile file (*.prof.csv)");
    app.add_option("--model", cfg.model, "discretization: ode_mid | ode_end")
        ->default_str("ode_end");
    app.add_option("--solver", cfg.solver,
                   "time stepper: generic | imex1 | imex2 | rk4 | rk2hyp | rk4hyp")
        ->default_str("imex1");
    app.add_option("--reductor", cfg.reductors,
                   "reductor ids: pod_r | gopod_r | dmd_r | eds_ro_l | eds_wx_l | eds_wz_l")
        ->delimiter(',');
    app.add_option("--gravity", cfg.gravity, "gravity term: none | static | dynamic")
        ->default_str("none");
    app.add_option("--dt", cfg.dt, "time step override [s] (default: scenario hint)");
    app.add_option("--rtol", cfg.rtol, "relative tolerance for the adaptive solver");
    app.add_option("--rmax", cfg.rmax, "maximum reduced order")->default_str("100");
    app.add_option("--eps-digits", cfg.eps_digits, "MORscore precision digits")
        ->default_str("16");
    app.add_option("--gain-matching", cfg.gain_matching, "steady-state gain correction: on | off")
        ->check(CLI::IsMember({"on", "off"}));
    app.add_option("--jobs", cfg.jobs, "worker threads");
    app.add_option("--out", cfg.out, "output directory")->default_str("out");

    auto* validate_cmd = app.add_subcommand("validate", "parse and check a network file");
    auto* simulate_cmd = app.add_subcommand("simulate", "run one transient simulation");
    auto* reduce_cmd = app.add_subcommand("reduce", "train and persist reduced order models");
    auto* sweep_cmd = app.add_subcommand("sweep", "error-vs-order benchmark per reductor");
    auto* compare_cmd = app.add_subcommand("compare", "rank existing sweep reports");
    compare_cmd->add_option("reports", compare_files, "report CSV files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (validate_cmd->parsed()) return cmd_validate(cfg);
        if (simulate_cmd->parsed()) return cmd_simulate(cfg);
        if (reduce_cmd->parsed()) return cmd_reduce(cfg);
        if (sweep_cmd->parsed()) return cmd_sweep(cfg);
        if (compare_cmd->parsed()) return cmd_compare(cfg, compare_files);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
