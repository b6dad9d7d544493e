#pragma once

// Shared fixtures for the unit suites: a small gas tree, a single pipe, and
// a stiff LTI test system with a closed-form solution.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "gasnet/model.hpp"

namespace testutil {

inline gasnet::Network single_pipe_network() {
    return gasnet::parse_network(
        "# pipes\n"
        "P1,N1,N2,10000,0.5,0,1e-5\n"
        "# ports\n"
        "supply,N1\n"
        "demand,N2\n");
}

inline gasnet::Network tree_network() {
    return gasnet::parse_network(
        "# pipes\n"
        "P1,N1,N2,8000,0.8,0,1e-5\n"
        "P2,N2,N3,6000,0.7,0,1e-5\n"
        "P3,N2,N4,9000,0.7,0,2e-5\n"
        "# ports\n"
        "supply,N1\n"
        "demand,N3\ndemand,N4\n");
}

inline gasnet::SemiDiscreteModel steadied(const gasnet::Network& net,
                                          gasnet::DiscretizationScheme scheme,
                                          double supply_pa, Eigen::VectorXd demand) {
    auto m = gasnet::assemble(net, {}, scheme, gasnet::GravityMode::none);
    Eigen::VectorXd s(1);
    s << supply_pa;
    return gasnet::steady_state(m, s, demand).first;
}

inline gasnet::SemiDiscreteModel tree_model(
    gasnet::DiscretizationScheme scheme = gasnet::DiscretizationScheme::endpoint) {
    Eigen::VectorXd d(2);
    d << 25.0, 18.0;
    return steadied(tree_network(), scheme, 60e5, d);
}

inline gasnet::SemiDiscreteModel pipe_model(
    gasnet::DiscretizationScheme scheme = gasnet::DiscretizationScheme::endpoint) {
    Eigen::VectorXd d(1);
    d << 30.0;
    return steadied(single_pipe_network(), scheme, 60e5, d);
}

/// Stiff LTI test system E x' = A x + B u + N x with the coupling N carried
/// in f() so the IMEX split is genuinely exercised. Constant input keeps the
/// problem affine, so every tableau shows its linear order. The initial
/// state sits on the slow manifold: the stiff mode constrains stability but
/// never pollutes the smooth reference solution.
struct StiffLti {
    gasnet::OdeSystem sys;
    Eigen::VectorXd x0;
    Eigen::VectorXd u_const;

    Eigen::VectorXd exact(double t) const {
        Eigen::MatrixXd einv = sys.E.inverse();
        Eigen::MatrixXd m = einv * (sys.A + Eigen::MatrixXd(sys.f_jacobian(x0)));
        Eigen::VectorXd b = einv * sys.B * u_const;
        Eigen::VectorXd xs = -m.partialPivLu().solve(b);
        Eigen::MatrixXd phi = (t * m).exp();
        return phi * (x0 - xs) + xs;
    }
};

inline StiffLti make_stiff_lti() {
    StiffLti s;
    Eigen::MatrixXd e(3, 3), a(3, 3), n(3, 3), b(3, 1);
    e << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0;
    // slow damped oscillation (about -0.3 +- 2i) against a fast mode (-12)
    a << -0.3, 2.0, 0.0, -2.0, -0.3, 0.2, 0.1, 0.0, -24.0;
    n << 0.0, 0.1, 0.0, -0.05, 0.0, 0.0, 0.0, 0.05, 0.0;
    b << 1.0, 0.5, 0.3;
    s.sys.E = e;
    s.sys.A = a;
    s.sys.B = b;
    s.sys.C = Eigen::MatrixXd::Identity(3, 3);
    s.sys.D = Eigen::MatrixXd::Zero(3, 1);
    Eigen::MatrixXd ncopy = n;
    s.sys.f = [ncopy](const Eigen::VectorXd& x) { return Eigen::VectorXd(ncopy * x); };
    s.sys.f_jacobian = [ncopy](const Eigen::VectorXd&) { return ncopy; };
    s.u_const.resize(1);
    s.u_const << 1.0;

    // x0 = equilibrium + real part of the slow eigenplane, so the stiff mode
    // constrains stability without polluting the smooth reference solution
    Eigen::MatrixXd m = e.inverse() * (a + n);
    Eigen::VectorXd xs = -m.partialPivLu().solve(Eigen::VectorXd(e.inverse() * b * s.u_const));
    Eigen::EigenSolver<Eigen::MatrixXd> eig(m);
    Eigen::Index slow = 0;
    eig.eigenvalues().real().cwiseAbs().minCoeff(&slow);
    Eigen::VectorXd v = eig.eigenvectors().col(slow).real();
    s.x0 = xs + v / v.norm();
    return s;
}

inline gasnet::InputSignal constant_input(const Eigen::VectorXd& u) {
    return [u](double) { return u; };
}

/// Richardson slope from endpoint errors on the dt ladder T/2^l, l in
/// [lmin, lmax]; returns the mean of successive log2 ratios.
template <typename ErrFn>
double convergence_slope(ErrFn err, double T, int lmin, int lmax) {
    std::vector<double> errs;
    for (int l = lmin; l <= lmax; ++l) errs.push_back(err(T / std::pow(2.0, l)));
    double acc = 0.0;
    for (size_t i = 0; i + 1 < errs.size(); ++i) acc += std::log2(errs[i] / errs[i + 1]);
    return acc / double(errs.size() - 1);
}

}  // namespace testutil
