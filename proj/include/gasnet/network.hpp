#pragma once

// Network topology + boundary scenario ingestion.
//
// File formats (see README):
//   *.net.csv   "# pipes" section with rows id,from,to,length_m,diameter_m,
//               height_delta_m,roughness_m, then "# ports" with
//               supply,<node> / demand,<node> rows.
//   *.scn.csv   directives "! T=<sec>" / "! dt=<sec>", header t_s,<port>...,
//               one column per declared port (supply in Pa, demand in kg/s).
//   *.prof.csv  rows pipe_id,arclength_m,elevation_m.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "gasnet/csv.hpp"
#include "gasnet/errors.hpp"

namespace gasnet {

struct PipeSpec {
    std::string id;
    std::string from_node;
    std::string to_node;
    double length = 0.0;        // [m], > 0
    double diameter = 0.0;      // [m], > 0
    double height_delta = 0.0;  // [m], to-node elevation minus from-node elevation
    double roughness = 0.0;     // [m], >= 0

    bool operator==(const PipeSpec&) const = default;
};

struct Network {
    std::vector<std::string> nodes;  // declaration order
    std::vector<PipeSpec> pipes;     // declaration order
    std::vector<std::string> supply_nodes;
    std::vector<std::string> demand_nodes;

    bool operator==(const Network&) const = default;
};

inline int node_index(const Network& net, const std::string& id) {
    auto it = std::find(net.nodes.begin(), net.nodes.end(), id);
    return it == net.nodes.end() ? -1 : int(it - net.nodes.begin());
}

inline bool is_supply(const Network& net, const std::string& id) {
    return std::find(net.supply_nodes.begin(), net.supply_nodes.end(), id) !=
           net.supply_nodes.end();
}

// ---------------------------------------------------------------------------
// Piecewise-linear boundary series
// ---------------------------------------------------------------------------

/// Piecewise-linear time series; constant extension outside the sample range.
struct Series {
    Eigen::VectorXd times;
    Eigen::VectorXd values;

    double eval(double t) const {
        const Eigen::Index n = times.size();
        if (n == 0) return 0.0;
        if (t <= times[0]) return values[0];
        if (t >= times[n - 1]) return values[n - 1];
        // largest k with times[k] <= t
        Eigen::Index lo = 0, hi = n - 1;
        while (hi - lo > 1) {
            Eigen::Index mid = (lo + hi) / 2;
            (times[mid] <= t ? lo : hi) = mid;
        }
        double w = (t - times[lo]) / (times[lo + 1] - times[lo]);
        return (1.0 - w) * values[lo] + w * values[lo + 1];
    }
};

struct Scenario {
    double horizon = 0.0;  // T [s]
    double dt_hint = 0.0;  // step hint [s]
    std::vector<std::string> supply_ports;  // network declaration order
    std::vector<std::string> demand_ports;
    std::vector<Series> supply_pressure;  // [Pa], aligned with supply_ports
    std::vector<Series> demand_flux;      // [kg/s], aligned with demand_ports
    Eigen::VectorXd steady_supply;        // t=0 samples
    Eigen::VectorXd steady_demand;
};

// ---------------------------------------------------------------------------
// Incidence
// ---------------------------------------------------------------------------

/// Signed incidence split into non-supply rows (A0) and supply rows (AS).
/// Column k has -1 at the from-node row and +1 at the to-node row.
struct IncidenceDecomposition {
    Eigen::MatrixXd A0;  // (#non-supply nodes) x (#pipes)
    Eigen::MatrixXd AS;  // (#supply nodes) x (#pipes)
    std::vector<std::string> interior_order;  // rows of A0 (non-supply nodes)
    std::vector<std::string> supply_order;    // rows of AS
};

inline IncidenceDecomposition incidence(const Network& net) {
    IncidenceDecomposition inc;
    std::unordered_map<std::string, int> row;
    for (const auto& n : net.nodes) {
        if (is_supply(net, n)) continue;
        row[n] = int(inc.interior_order.size());
        inc.interior_order.push_back(n);
    }
    std::unordered_map<std::string, int> srow;
    for (const auto& n : net.supply_nodes) {
        srow[n] = int(inc.supply_order.size());
        inc.supply_order.push_back(n);
    }
    const int np = int(inc.interior_order.size());
    const int ns = int(inc.supply_order.size());
    const int nq = int(net.pipes.size());
    inc.A0 = Eigen::MatrixXd::Zero(np, nq);
    inc.AS = Eigen::MatrixXd::Zero(ns, nq);
    for (int k = 0; k < nq; ++k) {
        const PipeSpec& p = net.pipes[k];
        auto stamp = [&](const std::string& node, double sign) {
            if (auto it = row.find(node); it != row.end())
                inc.A0(it->second, k) = sign;
            else
                inc.AS(srow.at(node), k) = sign;
        };
        stamp(p.from_node, -1.0);
        stamp(p.to_node, +1.0);
    }
    return inc;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct DiagnosticEntry {
    std::string check;
    bool passed = false;
    std::string detail;
};

struct NetworkDiagnostics {
    std::vector<DiagnosticEntry> entries;
    bool connected = false;
    bool tree = false;
    int node_count = 0;
    int pipe_count = 0;
    int supply_count = 0;
    int demand_count = 0;

    bool ok() const {
        return std::all_of(entries.begin(), entries.end(),
                           [](const DiagnosticEntry& e) { return e.passed; });
    }
    std::string first_failure() const {
        for (const auto& e : entries)
            if (!e.passed) return e.check + ": " + e.detail;
        return {};
    }
};

inline NetworkDiagnostics validate(const Network& net) {
    NetworkDiagnostics diag;
    diag.node_count = int(net.nodes.size());
    diag.pipe_count = int(net.pipes.size());
    diag.supply_count = int(net.supply_nodes.size());
    diag.demand_count = int(net.demand_nodes.size());
    auto add = [&](const std::string& check, bool ok, const std::string& detail) {
        diag.entries.push_back({check, ok, detail});
    };

    // geometry
    {
        std::string bad;
        for (const auto& p : net.pipes) {
            if (!(p.length > 0.0)) { bad = "pipe '" + p.id + "': length must be positive"; break; }
            if (!(p.diameter > 0.0)) { bad = "pipe '" + p.id + "': diameter must be positive"; break; }
            if (p.roughness < 0.0) { bad = "pipe '" + p.id + "': roughness must be nonnegative"; break; }
            if (p.from_node == p.to_node) { bad = "pipe '" + p.id + "': self-loop"; break; }
        }
        add("geometry", bad.empty(), bad.empty() ? "all pipe parameters admissible" : bad);
    }

    // node references
    {
        std::string bad;
        std::set<std::string> known(net.nodes.begin(), net.nodes.end());
        for (const auto& p : net.pipes) {
            if (!known.count(p.from_node)) { bad = "pipe '" + p.id + "': unknown node '" + p.from_node + "'"; break; }
            if (!known.count(p.to_node)) { bad = "pipe '" + p.id + "': unknown node '" + p.to_node + "'"; break; }
        }
        for (const auto& n : net.supply_nodes)
            if (bad.empty() && !known.count(n)) bad = "supply port on unknown node '" + n + "'";
        for (const auto& n : net.demand_nodes)
            if (bad.empty() && !known.count(n)) bad = "demand port on unknown node '" + n + "'";
        add("node references", bad.empty(), bad.empty() ? "all references resolve" : bad);
    }

    // ports
    {
        std::string bad;
        if (net.supply_nodes.empty()) bad = "no supply nodes declared";
        for (const auto& n : net.demand_nodes)
            if (bad.empty() && is_supply(net, n))
                bad = "overlapping port sets: node '" + n + "' is both supply and demand";
        add("ports", bad.empty(),
            bad.empty() ? std::to_string(diag.supply_count) + " supply, " +
                              std::to_string(diag.demand_count) + " demand"
                        : bad);
    }

    // connectivity (undirected BFS)
    {
        std::unordered_map<std::string, std::vector<std::string>> adj;
        for (const auto& p : net.pipes) {
            adj[p.from_node].push_back(p.to_node);
            adj[p.to_node].push_back(p.from_node);
        }
        std::set<std::string> seen;
        if (!net.nodes.empty()) {
            std::vector<std::string> stack{net.nodes.front()};
            seen.insert(net.nodes.front());
            while (!stack.empty()) {
                std::string cur = stack.back();
                stack.pop_back();
                for (const auto& nb : adj[cur])
                    if (seen.insert(nb).second) stack.push_back(nb);
            }
        }
        diag.connected = seen.size() == net.nodes.size();
        std::string bad;
        if (!diag.connected) {
            for (const auto& n : net.nodes)
                if (!seen.count(n)) { bad = "disconnected: node '" + n + "' unreachable"; break; }
        }
        add("connected", diag.connected, diag.connected ? "graph is connected" : bad);
    }

    diag.tree = diag.connected && diag.pipe_count == diag.node_count - 1;
    add("classification", true,
        diag.tree ? "tree" : (diag.connected ? "cycles present" : "n/a"));
    return diag;
}

// ---------------------------------------------------------------------------
// Network file parsing / serialization
// ---------------------------------------------------------------------------

namespace detail {
inline const char* kPipeHeader = "id,from,to,length_m,diameter_m,height_delta_m,roughness_m";

inline void add_node(Network& net, std::set<std::string>& known, const std::string& id) {
    if (known.insert(id).second) net.nodes.push_back(id);
}
}  // namespace detail

inline Network parse_network(std::istream& in) {
    Network net;
    std::set<std::string> known;
    std::set<std::string> pipe_ids;
    enum class Section { none, pipes, ports } section = Section::none;

    for (const csv::Line& ln : csv::read_lines(in)) {
        if (ln.text[0] == '#') {
            std::string tag = csv::trim(ln.text.substr(1));
            if (tag == "pipes") section = Section::pipes;
            else if (tag == "ports") section = Section::ports;
            continue;  // any other '#' line is a comment
        }
        if (section == Section::pipes) {
            if (ln.text.rfind("id,", 0) == 0) continue;  // column header row
            auto f = csv::split(ln.text);
            if (f.size() != 7)
                throw ParseError("expected 7 fields (" + std::string(detail::kPipeHeader) + ")",
                                 ln.number, 1);
            PipeSpec p;
            p.id = f[0];
            p.from_node = f[1];
            p.to_node = f[2];
            p.length = csv::parse_double(f[3], ln.number, 4);
            p.diameter = csv::parse_double(f[4], ln.number, 5);
            p.height_delta = csv::parse_double(f[5], ln.number, 6);
            p.roughness = csv::parse_double(f[6], ln.number, 7);
            if (p.id.empty()) throw ParseError("empty pipe id", ln.number, 1);
            if (!pipe_ids.insert(p.id).second)
                throw ValidationError("duplicate pipe id '" + p.id + "'");
            detail::add_node(net, known, p.from_node);
            detail::add_node(net, known, p.to_node);
            net.pipes.push_back(std::move(p));
        } else if (section == Section::ports) {
            auto f = csv::split(ln.text);
            if (f.size() != 2) throw ParseError("expected 'supply,<node>' or 'demand,<node>'", ln.number, 1);
            detail::add_node(net, known, f[1]);
            if (f[0] == "supply") {
                if (std::find(net.supply_nodes.begin(), net.supply_nodes.end(), f[1]) != net.supply_nodes.end())
                    throw ValidationError("duplicate supply declaration for node '" + f[1] + "'");
                net.supply_nodes.push_back(f[1]);
            } else if (f[0] == "demand") {
                if (std::find(net.demand_nodes.begin(), net.demand_nodes.end(), f[1]) != net.demand_nodes.end())
                    throw ValidationError("duplicate demand declaration for node '" + f[1] + "'");
                net.demand_nodes.push_back(f[1]);
            } else {
                throw ParseError("unknown port kind '" + f[0] + "'", ln.number, 1);
            }
        } else {
            throw ParseError("data before '# pipes' section", ln.number, 1);
        }
    }

    NetworkDiagnostics diag = validate(net);
    if (!diag.ok()) throw ValidationError(diag.first_failure());
    return net;
}

inline Network parse_network(const std::string& text) {
    std::istringstream in(text);
    return parse_network(in);
}

inline std::string serialize_network(const Network& net) {
    std::ostringstream os;
    os << "# pipes\n" << detail::kPipeHeader << "\n";
    for (const auto& p : net.pipes)
        os << p.id << ',' << p.from_node << ',' << p.to_node << ','
           << csv::format_double(p.length) << ',' << csv::format_double(p.diameter) << ','
           << csv::format_double(p.height_delta) << ',' << csv::format_double(p.roughness) << '\n';
    os << "# ports\n";
    for (const auto& n : net.supply_nodes) os << "supply," << n << '\n';
    for (const auto& n : net.demand_nodes) os << "demand," << n << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Scenario parsing
// ---------------------------------------------------------------------------

inline Scenario parse_scenario(std::istream& in, const Network& net) {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    double horizon = -1.0, dt = -1.0;
    int header_line = 0;

    for (const csv::Line& ln : csv::read_lines(in)) {
        if (ln.text[0] == '#') continue;
        if (ln.text[0] == '!') {
            std::string d = csv::trim(ln.text.substr(1));
            auto eq = d.find('=');
            if (eq == std::string::npos) throw ParseError("malformed directive", ln.number, 1);
            std::string key = csv::trim(d.substr(0, eq));
            double val = csv::parse_double(csv::trim(d.substr(eq + 1)), ln.number, 1);
            if (key == "T") horizon = val;
            else if (key == "dt") dt = val;
            else throw ParseError("unknown directive '" + key + "'", ln.number, 1);
            continue;
        }
        if (header.empty()) {
            header = csv::split(ln.text);
            header_line = ln.number;
            if (header.empty() || header[0] != "t_s")
                throw ParseError("scenario header must start with 't_s'", ln.number, 1);
            continue;
        }
        auto f = csv::split(ln.text);
        if (f.size() != header.size())
            throw ParseError("row has " + std::to_string(f.size()) + " fields, header has " +
                                 std::to_string(header.size()),
                             ln.number, 1);
        std::vector<double> row(f.size());
        for (size_t j = 0; j < f.size(); ++j) row[j] = csv::parse_double(f[j], ln.number, int(j + 1));
        rows.push_back(std::move(row));
    }

    if (header.empty()) throw ParseError("empty scenario file");
    if (!(horizon > 0.0)) throw ParseError("missing or nonpositive '! T=' directive");
    if (!(dt > 0.0)) throw ParseError("missing or nonpositive '! dt=' directive");
    if (rows.empty()) throw ParseError("scenario has no sample rows");
    if (rows.front()[0] != 0.0) throw ParseError("missing t=0 row", header_line);
    for (size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i][0] > rows[i - 1][0]))
            throw ParseError("time not increasing at t=" + csv::format_double(rows[i][0]));

    // map columns to declared ports
    std::map<std::string, int> col;
    for (size_t j = 1; j < header.size(); ++j) {
        const std::string& id = header[j];
        bool supply = is_supply(net, id);
        bool demand = std::find(net.demand_nodes.begin(), net.demand_nodes.end(), id) !=
                      net.demand_nodes.end();
        if (!supply && !demand)
            throw ParseError("unknown port id '" + id + "'", header_line, int(j + 1));
        if (!col.emplace(id, int(j)).second)
            throw ParseError("duplicate column for port '" + id + "'", header_line, int(j + 1));
    }

    const Eigen::Index nrows = Eigen::Index(rows.size());
    Eigen::VectorXd times(nrows);
    for (Eigen::Index i = 0; i < nrows; ++i) times[i] = rows[i][0];

    auto make_series = [&](const std::string& port, bool pressure) {
        auto it = col.find(port);
        if (it == col.end())
            throw ParseError("missing column for " + std::string(pressure ? "supply" : "demand") +
                             " port '" + port + "'");
        Series s;
        s.times = times;
        s.values.resize(nrows);
        for (Eigen::Index i = 0; i < nrows; ++i) {
            double v = rows[i][it->second];
            if (pressure && !(v > 0.0))
                throw ParseError("pressure must be positive for port '" + port + "' at t=" +
                                 csv::format_double(times[i]));
            s.values[i] = v;
        }
        return s;
    };

    Scenario sc;
    sc.horizon = horizon;
    sc.dt_hint = dt;
    for (const auto& n : net.supply_nodes) {
        sc.supply_ports.push_back(n);
        sc.supply_pressure.push_back(make_series(n, true));
    }
    for (const auto& n : net.demand_nodes) {
        sc.demand_ports.push_back(n);
        sc.demand_flux.push_back(make_series(n, false));
    }
    sc.steady_supply.resize(Eigen::Index(sc.supply_pressure.size()));
    for (size_t i = 0; i < sc.supply_pressure.size(); ++i)
        sc.steady_supply[Eigen::Index(i)] = sc.supply_pressure[i].values[0];
    sc.steady_demand.resize(Eigen::Index(sc.demand_flux.size()));
    for (size_t i = 0; i < sc.demand_flux.size(); ++i)
        sc.steady_demand[Eigen::Index(i)] = sc.demand_flux[i].values[0];
    return sc;
}

inline Scenario parse_scenario(const std::string& text, const Network& net) {
    std::istringstream in(text);
    return parse_scenario(in, net);
}

// ---------------------------------------------------------------------------
// Height profiles -> virtual pipes
// ---------------------------------------------------------------------------

/// Splits a pipe at interior local elevation extrema into virtual pipes.
/// Generated ids: "<pipe>.k" for segment k, "<pipe>.nk" for interior nodes.
inline std::vector<PipeSpec> expand_height_profile(
    const PipeSpec& pipe, const std::vector<std::pair<double, double>>& profile) {
    if (profile.size() < 2)
        throw ValidationError("pipe '" + pipe.id + "': fewer than 2 profile points");
    for (size_t i = 1; i < profile.size(); ++i)
        if (!(profile[i].first > profile[i - 1].first))
            throw ValidationError("pipe '" + pipe.id + "': profile arclength not increasing");
    if (profile.front().first != 0.0)
        throw ValidationError("pipe '" + pipe.id + "': profile must start at arclength 0");
    if (std::abs(profile.back().first - pipe.length) > 1e-9)
        throw ValidationError("pipe '" + pipe.id + "': profile ends at " +
                              csv::format_double(profile.back().first) + " m, pipe length is " +
                              csv::format_double(pipe.length) + " m");
    if (std::abs((profile.back().second - profile.front().second) - pipe.height_delta) > 1e-9)
        throw ValidationError("pipe '" + pipe.id +
                              "': profile endpoint elevations inconsistent with height_delta");

    // interior breakpoints at strict sign changes; plateaus merge into the
    // following segment
    std::vector<size_t> breaks{0};
    int prev_sign = 0;
    size_t candidate = 0;
    for (size_t i = 0; i + 1 < profile.size(); ++i) {
        double d = profile[i + 1].second - profile[i].second;
        if (d == 0.0) continue;
        int s = d > 0.0 ? 1 : -1;
        if (prev_sign != 0 && s != prev_sign) breaks.push_back(candidate);
        prev_sign = s;
        candidate = i + 1;
    }
    breaks.push_back(profile.size() - 1);

    if (breaks.size() == 2) return {pipe};  // no interior extremum: unchanged

    std::vector<PipeSpec> out;
    double used_length = 0.0, used_delta = 0.0;
    for (size_t s = 0; s + 1 < breaks.size(); ++s) {
        const auto& a = profile[breaks[s]];
        const auto& b = profile[breaks[s + 1]];
        PipeSpec v = pipe;
        v.id = pipe.id + "." + std::to_string(s + 1);
        v.from_node = s == 0 ? pipe.from_node : pipe.id + ".n" + std::to_string(s);
        v.to_node = s + 2 == breaks.size() ? pipe.to_node : pipe.id + ".n" + std::to_string(s + 1);
        if (s + 2 == breaks.size()) {
            // last segment absorbs rounding so totals match the parent exactly
            v.length = pipe.length - used_length;
            v.height_delta = pipe.height_delta - used_delta;
        } else {
            v.length = b.first - a.first;
            v.height_delta = b.second - a.second;
            used_length += v.length;
            used_delta += v.height_delta;
        }
        out.push_back(std::move(v));
    }
    return out;
}

/// Profile table: pipe id -> (arclength, elevation) samples in file order.
using HeightProfiles = std::map<std::string, std::vector<std::pair<double, double>>>;

inline HeightProfiles parse_height_profiles(std::istream& in) {
    HeightProfiles prof;
    for (const csv::Line& ln : csv::read_lines(in)) {
        if (ln.text[0] == '#') continue;
        if (ln.text.rfind("pipe_id,", 0) == 0) continue;
        auto f = csv::split(ln.text);
        if (f.size() != 3)
            throw ParseError("expected pipe_id,arclength_m,elevation_m", ln.number, 1);
        prof[f[0]].emplace_back(csv::parse_double(f[1], ln.number, 2),
                                csv::parse_double(f[2], ln.number, 3));
    }
    return prof;
}

/// Applies profiles pipe-by-pipe, splicing virtual pipes in declaration order.
inline Network apply_height_profiles(const Network& net, const HeightProfiles& profiles) {
    for (const auto& [id, _] : profiles)
        if (std::none_of(net.pipes.begin(), net.pipes.end(),
                         [&](const PipeSpec& p) { return p.id == id; }))
            throw ValidationError("height profile references unknown pipe '" + id + "'");

    Network out;
    out.supply_nodes = net.supply_nodes;
    out.demand_nodes = net.demand_nodes;
    std::set<std::string> known;
    for (const auto& p : net.pipes) {
        auto it = profiles.find(p.id);
        std::vector<PipeSpec> expanded =
            it == profiles.end() ? std::vector<PipeSpec>{p} : expand_height_profile(p, it->second);
        for (auto& v : expanded) {
            detail::add_node(out, known, v.from_node);
            detail::add_node(out, known, v.to_node);
            out.pipes.push_back(std::move(v));
        }
    }
    for (const auto& n : net.nodes) detail::add_node(out, known, n);
    NetworkDiagnostics diag = validate(out);
    if (!diag.ok()) throw ValidationError(diag.first_failure());
    return out;
}

}  // namespace gasnet
