#pragma once

// Semi-discrete gas network model.
//
// State x = (p, q): pressures [Pa] at non-supply nodes, mass fluxes [kg/s]
// per pipe. With gamma = R_s*T_0*z_0 the assembled system is
//
//   E_p,ii p_i' = sum_k +-q_k - d_i(t)            E_p,ii = sum_k S_k L_k/(2 gamma)
//   E_q,kk q_k' = p_i - p_j - F_k(q,p) - G_k(p)   E_q,kk = L_k/S_k
//
// with friction F_k = gamma lambda_k L_k |q_k| q_k / (2 d_k S_k^2 p*) and
// gravity G_k = (g dh_k/gamma) p_g. The friction pressure argument p* is the
// pipe midpoint pressure for `ode_mid` and the downstream endpoint pressure
// for `ode_end`; p_g follows the configured gravity mode. After the steady
// state is computed the exposed system is centered: x and u are deviations
// and f(0) = 0 exactly.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>

#include "gasnet/network.hpp"

namespace gasnet {

struct GasConstants {
    double R_s = 530.0;   // specific gas constant [J/(kg K)]
    double T_0 = 283.15;  // reference temperature [K]
    double z_0 = 0.8;     // reference compressibility [-]
    double g = 9.80665;   // gravitational acceleration [m/s^2]

    double gamma() const { return R_s * T_0 * z_0; }  // [m^2/s^2]
};

enum class DiscretizationScheme { midpoint, endpoint };  // ode_mid / ode_end
enum class GravityMode { none, static_p, dynamic_p };

inline bool is_port_hamiltonian(DiscretizationScheme s) {
    return s == DiscretizationScheme::endpoint;
}

inline std::string to_string(DiscretizationScheme s) {
    return s == DiscretizationScheme::midpoint ? "ode_mid" : "ode_end";
}
inline std::string to_string(GravityMode m) {
    switch (m) {
        case GravityMode::none: return "none";
        case GravityMode::static_p: return "static";
        default: return "dynamic";
    }
}
inline DiscretizationScheme scheme_from_string(const std::string& s) {
    if (s == "ode_mid") return DiscretizationScheme::midpoint;
    if (s == "ode_end") return DiscretizationScheme::endpoint;
    throw ValidationError("unknown model id '" + s + "' (expected ode_mid or ode_end)");
}
inline GravityMode gravity_from_string(const std::string& s) {
    if (s == "none") return GravityMode::none;
    if (s == "static") return GravityMode::static_p;
    if (s == "dynamic") return GravityMode::dynamic_p;
    throw ValidationError("unknown gravity mode '" + s + "' (expected none, static or dynamic)");
}

// ---------------------------------------------------------------------------
// Generic structured ODE system
// ---------------------------------------------------------------------------

/// Dense structured system  E x' = A x + B u(t) + f(x),  y = C x + D u.
/// Full-order models, reduced-order models, and synthetic test systems all
/// use this one shape, so every stepper runs the same code path for each.
struct OdeSystem {
    Eigen::MatrixXd E, A, B, C, D;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;           // empty => 0
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> f_jacobian;  // empty => 0

    Eigen::Index order() const { return E.rows(); }
    Eigen::Index inputs() const { return B.cols(); }
    Eigen::Index outputs() const { return C.rows(); }

    Eigen::VectorXd nonlinear(const Eigen::VectorXd& x) const {
        return f ? f(x) : Eigen::VectorXd::Zero(order());
    }
    Eigen::MatrixXd nonlinear_jacobian(const Eigen::VectorXd& x) const {
        return f_jacobian ? f_jacobian(x) : Eigen::MatrixXd::Zero(order(), order());
    }
    /// Right-hand side A x + B u + f(x) (not yet multiplied by E^{-1}).
    Eigen::VectorXd rhs(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        return A * x + B * u + nonlinear(x);
    }
    Eigen::VectorXd output(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        return C * x + D * u;
    }
};

using InputSignal = std::function<Eigen::VectorXd(double)>;

inline InputSignal zero_input(Eigen::Index m) {
    return [m](double) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(m); };
}

// ---------------------------------------------------------------------------
// Gas network model
// ---------------------------------------------------------------------------

namespace detail {

struct PipeData {
    double length = 0, diameter = 0, area = 0, lambda = 0;
    double fric_coef = 0;  // gamma lambda L / (2 d S^2)
    double grav_coef = 0;  // g dh / gamma
    int from_p = -1, to_p = -1;  // index into p-block, -1 if supply endpoint
    int from_s = -1, to_s = -1;  // index into supply list, -1 otherwise
};

/// Immutable data shared by the model and its nonlinearity closures.
struct ModelCore {
    std::vector<PipeData> pipes;
    std::vector<std::string> node_order;  // non-supply nodes (p-block labels)
    int np = 0, nq = 0;
    DiscretizationScheme scheme = DiscretizationScheme::endpoint;
    GravityMode gravity = GravityMode::none;
    GasConstants constants;
    Eigen::VectorXd supply_pressure;  // steady supply values entering p*
    Eigen::VectorXd xbar;             // absolute steady state (set once steadied)
    Eigen::VectorXd fbar;             // f_absolute(xbar)
    Eigen::VectorXd pstar_bar;        // steady p* per pipe (static gravity)
    bool steadied = false;

    double endpoint_pressure(const Eigen::VectorXd& x_abs, int p_idx, int s_idx) const {
        return p_idx >= 0 ? x_abs[p_idx] : supply_pressure[s_idx];
    }

    double pstar(const Eigen::VectorXd& x_abs, const PipeData& pk) const {
        double pf = endpoint_pressure(x_abs, pk.from_p, pk.from_s);
        double pt = endpoint_pressure(x_abs, pk.to_p, pk.to_s);
        return scheme == DiscretizationScheme::midpoint ? 0.5 * (pf + pt) : pt;
    }

    // static gravity is frozen at the steady p*; until that exists it tracks
    // the current p* (identical at the steady point)
    bool gravity_tracks_pstar() const {
        return gravity == GravityMode::dynamic_p ||
               (gravity == GravityMode::static_p && !steadied);
    }

    void check_pressures(const Eigen::VectorXd& x_abs) const {
        for (int i = 0; i < np; ++i)
            if (!(x_abs[i] > 0.0))
                throw NumericalError("pressure underflow at node '" + node_order[i] +
                                     "' (index " + std::to_string(i) + ")");
    }

    /// Friction + gravity in absolute variables; zero on the p-block.
    Eigen::VectorXd f_absolute(const Eigen::VectorXd& x_abs) const {
        check_pressures(x_abs);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(np + nq);
        for (int k = 0; k < nq; ++k) {
            const PipeData& pk = pipes[k];
            double ps = pstar(x_abs, pk);
            double q = x_abs[np + k];
            double val = -pk.fric_coef * std::abs(q) * q / ps;
            switch (gravity) {
                case GravityMode::none: break;
                case GravityMode::dynamic_p: val -= pk.grav_coef * ps; break;
                case GravityMode::static_p:
                    val -= pk.grav_coef * (steadied ? pstar_bar[k] : ps);
                    break;
            }
            out[np + k] = val;
        }
        return out;
    }

    Eigen::MatrixXd f_jacobian_absolute(const Eigen::VectorXd& x_abs) const {
        check_pressures(x_abs);
        const int n = np + nq;
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
        for (int k = 0; k < nq; ++k) {
            const PipeData& pk = pipes[k];
            double ps = pstar(x_abs, pk);
            double q = x_abs[np + k];
            jac(np + k, np + k) = -2.0 * pk.fric_coef * std::abs(q) / ps;
            // sensitivity of the row to p* (friction + dynamic gravity)
            double dval_dps = pk.fric_coef * std::abs(q) * q / (ps * ps);
            if (gravity_tracks_pstar()) dval_dps -= pk.grav_coef;
            if (scheme == DiscretizationScheme::midpoint) {
                if (pk.from_p >= 0) jac(np + k, pk.from_p) += 0.5 * dval_dps;
                if (pk.to_p >= 0) jac(np + k, pk.to_p) += 0.5 * dval_dps;
            } else {
                if (pk.to_p >= 0) jac(np + k, pk.to_p) += dval_dps;
            }
        }
        return jac;
    }
};

}  // namespace detail

struct SemiDiscreteModel {
    OdeSystem sys;  // deviation form once steadied
    DiscretizationScheme scheme = DiscretizationScheme::endpoint;
    GravityMode gravity = GravityMode::none;
    GasConstants constants;
    IncidenceDecomposition inc;
    std::vector<std::string> supply_ports;  // input/output ordering: supplies then demands
    std::vector<std::string> demand_ports;
    Eigen::VectorXd xbar;  // absolute steady state
    Eigen::VectorXd ubar;  // absolute steady input (sbar, dbar)
    Eigen::VectorXd ybar;  // absolute steady output
    std::shared_ptr<const detail::ModelCore> core;

    int np() const { return core->np; }
    int nq() const { return core->nq; }
    Eigen::Index order() const { return sys.order(); }
    bool steadied() const { return core->steadied; }
    bool port_hamiltonian() const { return is_port_hamiltonian(scheme); }

    std::vector<std::string> input_names() const {
        std::vector<std::string> names;
        for (const auto& s : supply_ports) names.push_back("p_" + s);
        for (const auto& d : demand_ports) names.push_back("q_" + d);
        return names;
    }
    /// Outputs are collocated with the inputs: delivered flux at supply
    /// nodes, pressure at demand nodes.
    std::vector<std::string> output_names() const {
        std::vector<std::string> names;
        for (const auto& s : supply_ports) names.push_back("q_" + s);
        for (const auto& d : demand_ports) names.push_back("p_" + d);
        return names;
    }
};

inline double nikuradse_friction(double diameter, double roughness) {
    if (roughness <= 0.0) return 0.0;  // hydraulically smooth limit
    double t = 2.0 * std::log10(diameter / roughness) + 1.138;
    return 1.0 / (t * t);
}

struct AssembleOptions {
    std::optional<double> friction_override;  // fixed lambda for all pipes
};

inline SemiDiscreteModel assemble(const Network& net, const GasConstants& constants,
                                  DiscretizationScheme scheme, GravityMode gravity,
                                  const AssembleOptions& opts = {}) {
    NetworkDiagnostics diag = validate(net);
    if (!diag.ok()) throw ValidationError(diag.first_failure());

    SemiDiscreteModel m;
    m.scheme = scheme;
    m.gravity = gravity;
    m.constants = constants;
    m.inc = incidence(net);
    m.supply_ports = net.supply_nodes;
    m.demand_ports = net.demand_nodes;

    const int np = int(m.inc.interior_order.size());
    const int nq = int(net.pipes.size());
    const int ns = int(net.supply_nodes.size());
    const int nd = int(net.demand_nodes.size());
    const int n = np + nq;
    const double gamma = constants.gamma();

    auto core = std::make_shared<detail::ModelCore>();
    core->np = np;
    core->nq = nq;
    core->scheme = scheme;
    core->gravity = gravity;
    core->constants = constants;
    core->node_order = m.inc.interior_order;

    std::unordered_map<std::string, int> prow, srow;
    for (int i = 0; i < np; ++i) prow[m.inc.interior_order[i]] = i;
    for (int j = 0; j < ns; ++j) srow[m.inc.supply_order[j]] = j;

    Eigen::VectorXd ep = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd eq(nq);
    for (int k = 0; k < nq; ++k) {
        const PipeSpec& p = net.pipes[k];
        detail::PipeData pd;
        pd.length = p.length;
        pd.diameter = p.diameter;
        pd.area = M_PI * p.diameter * p.diameter / 4.0;
        pd.lambda = opts.friction_override ? *opts.friction_override
                                           : nikuradse_friction(p.diameter, p.roughness);
        pd.fric_coef = gamma * pd.lambda * pd.length / (2.0 * pd.diameter * pd.area * pd.area);
        pd.grav_coef = constants.g * p.height_delta / gamma;
        if (auto it = prow.find(p.from_node); it != prow.end()) pd.from_p = it->second;
        else pd.from_s = srow.at(p.from_node);
        if (auto it = prow.find(p.to_node); it != prow.end()) pd.to_p = it->second;
        else pd.to_s = srow.at(p.to_node);

        double cell = pd.area * pd.length / (2.0 * gamma);
        if (pd.from_p >= 0) ep[pd.from_p] += cell;
        if (pd.to_p >= 0) ep[pd.to_p] += cell;
        eq[k] = pd.length / pd.area;
        core->pipes.push_back(pd);
    }

    m.sys.E = Eigen::MatrixXd::Zero(n, n);
    m.sys.E.diagonal().head(np) = ep;
    m.sys.E.diagonal().tail(nq) = eq;

    m.sys.A = Eigen::MatrixXd::Zero(n, n);
    m.sys.A.topRightCorner(np, nq) = m.inc.A0;
    m.sys.A.bottomLeftCorner(nq, np) = -m.inc.A0.transpose();

    m.sys.B = Eigen::MatrixXd::Zero(n, ns + nd);
    m.sys.B.bottomLeftCorner(nq, ns) = -m.inc.AS.transpose();
    for (int i = 0; i < nd; ++i) m.sys.B(prow.at(net.demand_nodes[i]), ns + i) = -1.0;

    m.sys.C = Eigen::MatrixXd::Zero(ns + nd, n);
    m.sys.C.topRightCorner(ns, nq) = -m.inc.AS;
    for (int i = 0; i < nd; ++i) m.sys.C(ns + i, prow.at(net.demand_nodes[i])) = 1.0;

    m.sys.D = Eigen::MatrixXd::Zero(ns + nd, ns + nd);
    m.core = core;
    return m;
}

struct SteadyStateDiagnostics {
    int iterations = 0;
    double residual = 0.0;  // scaled infinity norm
    bool converged = false;
};

namespace detail {
inline double scaled_residual(const Eigen::VectorXd& r, int np, double fscale, double pscale) {
    double rp = np > 0 ? r.head(np).cwiseAbs().maxCoeff() : 0.0;
    double rq = r.size() > np ? r.tail(r.size() - np).cwiseAbs().maxCoeff() : 0.0;
    return std::max(rp / fscale, rq / pscale);
}
}  // namespace detail

/// Solves 0 = A x + B ubar + f(x) by damped Newton and recenters the model
/// around the result. Returns the steadied model (the input is untouched).
inline std::pair<SemiDiscreteModel, SteadyStateDiagnostics> steady_state(
    const SemiDiscreteModel& model, const Eigen::VectorXd& supply_pressure,
    const Eigen::VectorXd& demand_flux) {
    const int ns = int(model.supply_ports.size());
    const int nd = int(model.demand_ports.size());
    if (supply_pressure.size() != ns || demand_flux.size() != nd)
        throw ValidationError("steady input dimensions do not match the port sets");
    if (!(supply_pressure.minCoeff() > 0.0))
        throw ValidationError("steady supply pressures must be positive");

    const int np = model.np(), nq = model.nq(), n = np + nq;

    auto core = std::make_shared<detail::ModelCore>(*model.core);
    core->supply_pressure = supply_pressure;
    core->steadied = false;  // solve sees dynamic-style gravity (agrees at steady)

    Eigen::VectorXd ubar(ns + nd);
    ubar << supply_pressure, demand_flux;
    const Eigen::VectorXd bu = model.sys.B * ubar;

    const double pscale = std::max(1.0, supply_pressure.maxCoeff());
    const double fscale =
        std::max(1.0, nd > 0 ? demand_flux.cwiseAbs().maxCoeff() : 0.0);

    // initial guess: uniform supply pressure, fluxes from nodal balance
    Eigen::VectorXd x(n);
    x.head(np).setConstant(supply_pressure.mean());
    if (nq > 0) {
        // A0 q = dbar; exact on trees, least squares otherwise
        Eigen::VectorXd d = Eigen::VectorXd::Zero(np);
        for (int i = 0; i < nd; ++i) {
            auto it = std::find(model.inc.interior_order.begin(), model.inc.interior_order.end(),
                                model.demand_ports[i]);
            d[it - model.inc.interior_order.begin()] = demand_flux[i];
        }
        x.tail(nq) = model.inc.A0.colPivHouseholderQr().solve(d);
    }

    auto residual = [&](const Eigen::VectorXd& xa) -> Eigen::VectorXd {
        return model.sys.A * xa + bu + core->f_absolute(xa);
    };

    SteadyStateDiagnostics diag;
    Eigen::VectorXd r = residual(x);
    double rnorm = detail::scaled_residual(r, np, fscale, pscale);
    for (diag.iterations = 0; diag.iterations < 50 && rnorm > 1e-10; ++diag.iterations) {
        Eigen::MatrixXd jac = model.sys.A + core->f_jacobian_absolute(x);
        Eigen::VectorXd step = jac.partialPivLu().solve(-r);
        double alpha = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 30; ++halving, alpha *= 0.5) {
            Eigen::VectorXd xt = x + alpha * step;
            if (np > 0 && xt.head(np).minCoeff() <= 0.0) continue;
            Eigen::VectorXd rt = residual(xt);
            double rtnorm = detail::scaled_residual(rt, np, fscale, pscale);
            if (rtnorm < rnorm) {
                x = xt;
                r = rt;
                rnorm = rtnorm;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    diag.residual = rnorm;
    diag.converged = rnorm <= 1e-10;
    if (!diag.converged)
        throw NumericalError("steady state Newton did not converge after " +
                             std::to_string(diag.iterations) +
                             " iterations (scaled residual " + csv::format_double(rnorm) + ")");

    core->xbar = x;
    core->fbar = core->f_absolute(x);
    core->pstar_bar.resize(nq);
    for (int k = 0; k < nq; ++k) core->pstar_bar[k] = core->pstar(x, core->pipes[k]);
    core->steadied = true;

    SemiDiscreteModel out = model;
    out.core = core;
    out.xbar = x;
    out.ubar = ubar;
    out.ybar = out.sys.C * x;
    // delivered supply flux is an absolute quantity, not a deviation: C acts
    // on the absolute state here, which is exact since C is linear
    std::shared_ptr<const detail::ModelCore> ccore = core;
    out.sys.f = [ccore](const Eigen::VectorXd& dx) -> Eigen::VectorXd {
        return ccore->f_absolute(ccore->xbar + dx) - ccore->fbar;
    };
    out.sys.f_jacobian = [ccore](const Eigen::VectorXd& dx) -> Eigen::MatrixXd {
        return ccore->f_jacobian_absolute(ccore->xbar + dx);
    };
    return {out, diag};
}

inline std::pair<SemiDiscreteModel, SteadyStateDiagnostics> steady_state(
    const SemiDiscreteModel& model, const Scenario& sc) {
    return steady_state(model, sc.steady_supply, sc.steady_demand);
}

/// Split right-hand side of E x' = (A x + B u) + f(x) at deviation state x.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> eval_rhs(const SemiDiscreteModel& model,
                                                            const Eigen::VectorXd& x,
                                                            const Eigen::VectorXd& u,
                                                            double /*t*/ = 0.0) {
    return {model.sys.A * x + model.sys.B * u, model.sys.nonlinear(x)};
}

/// Analytic Jacobian of the total right-hand side at deviation state x.
inline Eigen::MatrixXd eval_jacobian(const SemiDiscreteModel& model, const Eigen::VectorXd& x) {
    return model.sys.A + model.sys.nonlinear_jacobian(x);
}

/// Jacobian of the full RHS at the steady state (deviation zero).
inline Eigen::MatrixXd steady_linearization(const SemiDiscreteModel& model) {
    return eval_jacobian(model, Eigen::VectorXd::Zero(model.order()));
}

/// Deviation input signal (s - sbar, d - dbar) for a scenario.
inline InputSignal make_input(const SemiDiscreteModel& model, const Scenario& sc) {
    if (sc.supply_ports != model.supply_ports || sc.demand_ports != model.demand_ports)
        throw ValidationError("scenario ports do not match the model's port sets");
    const Eigen::VectorXd ubar = model.ubar;
    const int ns = int(sc.supply_ports.size());
    auto supply = sc.supply_pressure;
    auto demand = sc.demand_flux;
    return [ubar, ns, supply, demand](double t) -> Eigen::VectorXd {
        Eigen::VectorXd u(ubar.size());
        for (int j = 0; j < ns; ++j) u[j] = supply[j].eval(t);
        for (size_t i = 0; i < demand.size(); ++i) u[ns + Eigen::Index(i)] = demand[i].eval(t);
        return u - ubar;
    };
}

/// Debug dump: dimensions, spectral estimates of the steady linearization,
/// and the steady state itself.
inline void write_model_summary(std::ostream& os, const SemiDiscreteModel& model) {
    os << "key,value\n";
    os << "model," << to_string(model.scheme) << '\n';
    os << "gravity," << to_string(model.gravity) << '\n';
    os << "port_hamiltonian," << (model.port_hamiltonian() ? 1 : 0) << '\n';
    os << "n_p," << model.np() << '\n';
    os << "n_q," << model.nq() << '\n';
    os << "inputs," << model.sys.inputs() << '\n';
    os << "outputs," << model.sys.outputs() << '\n';
    if (model.steadied() && model.order() > 0 && model.order() <= 500) {
        Eigen::MatrixXd m =
            model.sys.E.diagonal().cwiseInverse().asDiagonal() * steady_linearization(model);
        Eigen::EigenSolver<Eigen::MatrixXd> eig(m, false);
        os << "eig_max_real," << csv::format_double(eig.eigenvalues().real().maxCoeff()) << '\n';
        os << "eig_min_real," << csv::format_double(eig.eigenvalues().real().minCoeff()) << '\n';
        os << "eig_max_imag," << csv::format_double(eig.eigenvalues().imag().cwiseAbs().maxCoeff())
           << '\n';
    }
    if (model.steadied()) {
        for (int i = 0; i < model.np(); ++i)
            os << "pbar_" << model.inc.interior_order[i] << ','
               << csv::format_double(model.xbar[i]) << '\n';
        for (int k = 0; k < model.nq(); ++k)
            os << "qbar_" << k << ',' << csv::format_double(model.xbar[model.np() + k]) << '\n';
    }
}

}  // namespace gasnet
