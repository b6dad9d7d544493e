#pragma once

// Time steppers with a uniform stepping contract over OdeSystem.
//
//   generic   adaptive 2nd order Rosenbrock pair, d = 1/(2+sqrt(2)),
//             embedded 3rd order error estimator
//   imex1     linear part implicit Euler, nonlinearity explicit
//   imex2     linear part implicit midpoint, nonlinearity explicit midpoint
//   rk4       classic explicit Runge-Kutta
//   rk2hyp    explicit 5-stage 2nd order, enlarged imaginary-axis stability
//   rk4hyp    explicit 6-stage 4th order, enlarged imaginary-axis stability
//
// All fixed-step methods are deterministic: identical inputs give
// bit-identical trajectories.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gasnet/model.hpp"

namespace gasnet {

// ---------------------------------------------------------------------------
// Butcher tableaus
// ---------------------------------------------------------------------------

struct ButcherTableau {
    std::string id;
    int stages = 0;
    Eigen::VectorXd c;
    Eigen::MatrixXd a;  // strictly lower triangular
    Eigen::VectorXd b;
    int order = 0;
    bool nested = false;  // only a(i, i-1) nonzero
};

inline ButcherTableau rk4_tableau() {
    ButcherTableau t;
    t.id = "rk4";
    t.stages = 4;
    t.order = 4;
    t.nested = true;
    t.c.resize(4);
    t.c << 0.0, 0.5, 0.5, 1.0;
    t.a = Eigen::MatrixXd::Zero(4, 4);
    t.a(1, 0) = 0.5;
    t.a(2, 1) = 0.5;
    t.a(3, 2) = 1.0;
    t.b.resize(4);
    t.b << 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0;
    return t;
}

inline ButcherTableau rk2hyp_tableau() {
    ButcherTableau t;
    t.id = "rk2hyp";
    t.stages = 5;
    t.order = 2;
    t.nested = true;
    t.c.resize(5);
    t.c << 0.0, 1.0 / 4.0, 1.0 / 6.0, 3.0 / 8.0, 1.0 / 2.0;
    t.a = Eigen::MatrixXd::Zero(5, 5);
    for (int i = 1; i < 5; ++i) t.a(i, i - 1) = t.c[i];
    t.b.resize(5);
    t.b << 0.0, 0.0, 0.0, 0.0, 1.0;
    return t;
}

inline ButcherTableau rk4hyp_tableau() {
    ButcherTableau t;
    t.id = "rk4hyp";
    t.stages = 6;
    t.order = 4;
    t.nested = true;
    t.c.resize(6);
    t.c << 0.0, 0.16791846623918, 0.48298439719700, 0.70546072965982, 0.09295870406537,
        0.76210081248836;
    t.a = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 1; i < 6; ++i) t.a(i, i - 1) = t.c[i];
    t.b.resize(6);
    t.b << -0.15108370762927, 0.75384683913851, -0.36016595357907, 0.52696773139913, 0.0,
        0.23043509067071;
    return t;
}

// ---------------------------------------------------------------------------
// Stepper registry
// ---------------------------------------------------------------------------

enum class SolverKind { rosenbrock, imex1, imex2, explicit_rk };

struct Stepper {
    std::string id;
    SolverKind kind = SolverKind::imex1;
    ButcherTableau tableau;  // explicit_rk only
};

inline const std::vector<std::string>& solver_ids() {
    static const std::vector<std::string> ids = {"generic", "imex1", "imex2",
                                                 "rk4",     "rk2hyp", "rk4hyp"};
    return ids;
}

inline Stepper make_stepper(const std::string& id) {
    Stepper s;
    s.id = id;
    if (id == "generic") s.kind = SolverKind::rosenbrock;
    else if (id == "imex1") s.kind = SolverKind::imex1;
    else if (id == "imex2") s.kind = SolverKind::imex2;
    else if (id == "rk4") { s.kind = SolverKind::explicit_rk; s.tableau = rk4_tableau(); }
    else if (id == "rk2hyp") { s.kind = SolverKind::explicit_rk; s.tableau = rk2hyp_tableau(); }
    else if (id == "rk4hyp") { s.kind = SolverKind::explicit_rk; s.tableau = rk4hyp_tableau(); }
    else {
        std::string valid;
        for (const auto& v : solver_ids()) valid += (valid.empty() ? "" : ", ") + v;
        throw ValidationError("unknown solver id '" + id + "' (valid: " + valid + ")");
    }
    return s;
}

// ---------------------------------------------------------------------------
// Stepping engine (per-integration factorization caches)
// ---------------------------------------------------------------------------

struct RosenbrockResult {
    Eigen::VectorXd x;
    double dt_used = 0.0;
    double dt_next = 0.0;
    bool accepted = false;
};

class StepperEngine {
public:
    StepperEngine(const OdeSystem& sys, Stepper stepper, InputSignal input,
                  double rtol = 1e-3, double atol = 1e-6)
        : sys_(sys), stepper_(std::move(stepper)), u_(std::move(input)),
          rtol_(rtol), atol_(atol) {
        if (!u_) u_ = zero_input(sys.inputs());
    }

    const Stepper& stepper() const { return stepper_; }

    Eigen::VectorXd step(const Eigen::VectorXd& x, double t, double dt) {
        switch (stepper_.kind) {
            case SolverKind::imex1: return imex1(x, t, dt);
            case SolverKind::imex2: return imex2(x, t, dt);
            case SolverKind::explicit_rk: return explicit_rk(x, t, dt);
            case SolverKind::rosenbrock: break;
        }
        throw ValidationError("adaptive stepper requires adaptive_step()");
    }

    Eigen::VectorXd explicit_rk(const Eigen::VectorXd& x, double t, double dt) {
        const ButcherTableau& tb = stepper_.tableau;
        ensure_lu_e();
        std::vector<Eigen::VectorXd> k(tb.stages);
        for (int i = 0; i < tb.stages; ++i) {
            Eigen::VectorXd y = x;
            if (tb.nested) {
                if (i > 0) y += dt * tb.a(i, i - 1) * k[i - 1];
            } else {
                for (int j = 0; j < i; ++j)
                    if (tb.a(i, j) != 0.0) y += dt * tb.a(i, j) * k[j];
            }
            k[i] = lu_e_.solve(sys_.rhs(y, u_(t + tb.c[i] * dt)));
        }
        Eigen::VectorXd out = x;
        for (int i = 0; i < tb.stages; ++i)
            if (tb.b[i] != 0.0) out += dt * tb.b[i] * k[i];
        return out;
    }

    /// (E - dt A) x+ = E x + dt (B u(t+dt) + f(x))
    Eigen::VectorXd imex1(const Eigen::VectorXd& x, double t, double dt) {
        ensure_lu_imex(dt);
        Eigen::VectorXd rhs = sys_.E * x + dt * (sys_.B * u_(t + dt) + sys_.nonlinear(x));
        Eigen::VectorXd next = lu_imex_.solve(rhs);
        if (!next.allFinite())
            throw NumericalError("singular implicit system at dt=" + csv::format_double(dt));
        return next;
    }

    /// stage: (E - dt/2 A) x* = E x + dt/2 (B u(t) + f(x))
    /// update: E x+ = E x + dt (A x* + B u(t+dt/2) + f(x*))
    Eigen::VectorXd imex2(const Eigen::VectorXd& x, double t, double dt) {
        ensure_lu_e();
        ensure_lu_imex_half(dt);
        Eigen::VectorXd stage_rhs =
            sys_.E * x + 0.5 * dt * (sys_.B * u_(t) + sys_.nonlinear(x));
        Eigen::VectorXd xs = lu_imex_half_.solve(stage_rhs);
        if (!xs.allFinite())
            throw NumericalError("singular implicit system at dt=" + csv::format_double(dt));
        return x + dt * lu_e_.solve(Eigen::VectorXd(
                       sys_.A * xs + sys_.B * u_(t + 0.5 * dt) + sys_.nonlinear(xs)));
    }

    /// One attempt of the 2(3) Rosenbrock pair (the ode23s scheme).
    RosenbrockResult rosenbrock(const Eigen::VectorXd& x, double t, double dt) {
        static const double d = 1.0 / (2.0 + std::sqrt(2.0));
        static const double e32 = 6.0 + std::sqrt(2.0);

        Eigen::MatrixXd jac = sys_.A + sys_.nonlinear_jacobian(x);
        Eigen::PartialPivLU<Eigen::MatrixXd> w(sys_.E - dt * d * jac);

        double delta = std::max(1e-9, 1e-7 * dt);
        Eigen::VectorXd dudt = (u_(t + delta) - u_(t)) / delta;
        Eigen::VectorXd tderiv = sys_.B * dudt;

        Eigen::VectorXd f0 = sys_.rhs(x, u_(t));
        Eigen::VectorXd k1 = w.solve(f0 + dt * d * tderiv);
        Eigen::VectorXd f1 = sys_.rhs(x + 0.5 * dt * k1, u_(t + 0.5 * dt));
        Eigen::VectorXd k2 = w.solve(f1 - sys_.E * k1) + k1;
        Eigen::VectorXd xnew = x + dt * k2;
        Eigen::VectorXd f2 = sys_.rhs(xnew, u_(t + dt));
        Eigen::VectorXd k3 = w.solve(f2 - e32 * (sys_.E * k2 - f1) -
                                     2.0 * (sys_.E * k1 - f0) + dt * d * tderiv);
        Eigen::VectorXd errvec = (dt / 6.0) * (k1 - 2.0 * k2 + k3);

        double err = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            double scale = atol_ + rtol_ * std::max(std::abs(x[i]), std::abs(xnew[i]));
            err = std::max(err, std::abs(errvec[i]) / scale);
        }

        RosenbrockResult res;
        res.dt_used = dt;
        res.accepted = std::isfinite(err) && err <= 1.0 && xnew.allFinite();
        res.x = res.accepted ? xnew : x;
        double factor = err > 0.0 ? 0.8 * std::pow(1.0 / err, 1.0 / 3.0)
                                  : 5.0;
        res.dt_next = dt * std::clamp(factor, 0.2, 5.0);
        return res;
    }

private:
    void ensure_lu_e() {
        if (!lu_e_ready_) {
            lu_e_.compute(sys_.E);
            lu_e_ready_ = true;
        }
    }
    void ensure_lu_imex(double dt) {
        if (!lu_imex_ready_ || dt != lu_imex_dt_) {
            lu_imex_.compute(sys_.E - dt * sys_.A);
            lu_imex_dt_ = dt;
            lu_imex_ready_ = true;
        }
    }
    void ensure_lu_imex_half(double dt) {
        if (!lu_imex_half_ready_ || dt != lu_imex_half_dt_) {
            lu_imex_half_.compute(sys_.E - 0.5 * dt * sys_.A);
            lu_imex_half_dt_ = dt;
            lu_imex_half_ready_ = true;
        }
    }

    const OdeSystem& sys_;
    Stepper stepper_;
    InputSignal u_;
    double rtol_, atol_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_e_, lu_imex_, lu_imex_half_;
    bool lu_e_ready_ = false, lu_imex_ready_ = false, lu_imex_half_ready_ = false;
    double lu_imex_dt_ = 0.0, lu_imex_half_dt_ = 0.0;
};

// one-shot wrappers (tests and external callers; integrate() keeps an engine)

inline Eigen::VectorXd explicit_rk_step(const ButcherTableau& tableau, const OdeSystem& sys,
                                        const Eigen::VectorXd& x, double t, double dt,
                                        const InputSignal& u) {
    Stepper st;
    st.id = tableau.id;
    st.kind = SolverKind::explicit_rk;
    st.tableau = tableau;
    return StepperEngine(sys, st, u).explicit_rk(x, t, dt);
}

inline Eigen::VectorXd imex1_step(const OdeSystem& sys, const Eigen::VectorXd& x, double t,
                                  double dt, const InputSignal& u) {
    return StepperEngine(sys, make_stepper("imex1"), u).imex1(x, t, dt);
}

inline Eigen::VectorXd imex2_step(const OdeSystem& sys, const Eigen::VectorXd& x, double t,
                                  double dt, const InputSignal& u) {
    return StepperEngine(sys, make_stepper("imex2"), u).imex2(x, t, dt);
}

inline RosenbrockResult rosenbrock_adaptive(const OdeSystem& sys, const Eigen::VectorXd& x,
                                            double t, double dt_try, const InputSignal& u,
                                            double rtol = 1e-3, double atol = 1e-6) {
    return StepperEngine(sys, make_stepper("generic"), u, rtol, atol).rosenbrock(x, t, dt_try);
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct Trajectory {
    Eigen::VectorXd times;
    Eigen::MatrixXd outputs;  // (#outputs) x (#samples), deviation outputs
    Eigen::MatrixXd states;   // order x (#samples) when recorded
    bool has_states = false;
    long accepted = 0;
    long rejected = 0;

    Eigen::Index samples() const { return times.size(); }
};

struct IntegrateOptions {
    bool record_states = false;
    double rtol = 1e-3;
    double atol = 1e-6;
    double dt_min = 1e-9;                                       // adaptive underflow bound
    double state_bound = std::numeric_limits<double>::infinity();  // divergence guard
    Eigen::VectorXd x0;                                         // empty: start at zero
};

/// Advances the system over [0, T] and records outputs every dt.
/// Fixed-step methods take ceil(T/dt) steps; the adaptive method controls
/// its own internal step but lands exactly on the output grid.
inline Trajectory integrate(const OdeSystem& sys, const Stepper& stepper, const InputSignal& u,
                            double T, double dt, const IntegrateOptions& opts = {}) {
    if (!(T > 0.0) || !(dt > 0.0)) throw ValidationError("integrate requires T > 0 and dt > 0");
    const Eigen::Index n = sys.order();
    const long steps = long(std::ceil(T / dt - 1e-9));

    Trajectory traj;
    traj.times.resize(steps + 1);
    traj.outputs.resize(sys.outputs(), steps + 1);
    if (opts.record_states) {
        traj.states.resize(n, steps + 1);
        traj.has_states = true;
    }

    InputSignal input = u ? u : zero_input(sys.inputs());
    StepperEngine engine(sys, stepper, input, opts.rtol, opts.atol);

    Eigen::VectorXd x = opts.x0.size() ? opts.x0 : Eigen::VectorXd::Zero(n);
    if (x.size() != n) throw ValidationError("x0 dimension mismatch");

    auto record = [&](long k, double t) {
        traj.times[k] = t;
        traj.outputs.col(k) = sys.output(x, input(t));
        if (opts.record_states) traj.states.col(k) = x;
    };
    auto check = [&](double t) {
        if (!x.allFinite())
            throw NumericalError("state is not finite at t=" + csv::format_double(t));
        if (x.cwiseAbs().maxCoeff() > opts.state_bound)
            throw NumericalError("state norm exceeded stability bound at t=" +
                                 csv::format_double(t));
    };

    record(0, 0.0);
    if (stepper.kind != SolverKind::rosenbrock) {
        for (long k = 0; k < steps; ++k) {
            double t = double(k) * dt;
            x = engine.step(x, t, dt);
            ++traj.accepted;
            check(t + dt);
            record(k + 1, t + dt);
        }
        return traj;
    }

    // adaptive loop with output at multiples of dt
    double t = 0.0;
    double dt_try = std::min(dt, T);
    for (long k = 0; k < steps; ++k) {
        const double t_goal = double(k + 1) * dt;
        while (t < t_goal - 1e-9 * dt) {
            double h = std::min(dt_try, t_goal - t);
            RosenbrockResult r = engine.rosenbrock(x, t, h);
            if (r.accepted) {
                x = r.x;
                t += r.dt_used;
                ++traj.accepted;
                check(t);
            } else {
                ++traj.rejected;
            }
            dt_try = r.dt_next;
            if (dt_try < opts.dt_min)
                throw NumericalError("adaptive step size underflow at t=" +
                                     csv::format_double(t));
        }
        t = t_goal;
        record(k + 1, t_goal);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Empirical stability limit
// ---------------------------------------------------------------------------

/// Largest stable step in [dt_lo, dt_hi]: 20 bisection iterations on the
/// predicate "trajectory stays finite and below 1e3 x reference norm".
inline double max_stable_dt(const OdeSystem& sys, const Stepper& stepper, const InputSignal& u,
                            double T, double dt_lo, double dt_hi, double reference_norm) {
    IntegrateOptions opts;
    opts.state_bound = 1e3 * std::max(reference_norm, 1e-30);
    auto stable = [&](double dt) {
        try {
            integrate(sys, stepper, u, T, dt, opts);
            return true;
        } catch (const NumericalError&) {
            return false;
        }
    };
    if (!stable(dt_lo)) throw NumericalError("entire step range unstable");
    if (stable(dt_hi)) return dt_hi;
    double lo = dt_lo, hi = dt_hi;
    for (int it = 0; it < 20; ++it) {
        double mid = 0.5 * (lo + hi);
        (stable(mid) ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace gasnet
