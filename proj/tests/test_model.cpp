#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "gasnet/model.hpp"

using namespace gasnet;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Network single_pipe() {
    return parse_network(
        "# pipes\n"
        "P1,N1,N2,10000,0.5,0,1e-5\n"
        "# ports\n"
        "supply,N1\n"
        "demand,N2\n");
}

Network small_tree(double dh = 0.0) {
    std::string dhs = csv::format_double(dh);
    return parse_network(
        "# pipes\n"
        "P1,N1,N2,8000,0.6," + dhs + ",1e-5\n"
        "P2,N2,N3,6000,0.5," + dhs + ",1e-5\n"
        "P3,N2,N4,9000,0.5," + dhs + ",2e-5\n"
        "# ports\n"
        "supply,N1\n"
        "demand,N3\ndemand,N4\n");
}

SemiDiscreteModel steadied_tree(DiscretizationScheme scheme, GravityMode grav, double dh = 0.0) {
    SemiDiscreteModel m = assemble(small_tree(dh), {}, scheme, grav);
    VectorXd sbar(1), dbar(2);
    sbar << 60e5;
    dbar << 25.0, 18.0;
    return steady_state(m, sbar, dbar).first;
}

// central-difference oracle for the RHS Jacobian
MatrixXd fd_jacobian(const SemiDiscreteModel& m, const VectorXd& x) {
    const Eigen::Index n = m.order();
    const VectorXd u = VectorXd::Zero(m.sys.inputs());
    MatrixXd jac(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double h = 1e-6 * std::max(std::abs(m.xbar[j]), 1.0);
        VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        auto [lp, np_] = eval_rhs(m, xp, u);
        auto [lm, nm_] = eval_rhs(m, xm, u);
        jac.col(j) = ((lp + np_) - (lm + nm_)) / (2.0 * h);
    }
    return jac;
}

}  // namespace

TEST_CASE("single pipe assembly matches hand-computed blocks", "[model]") {
    GasConstants gc;
    SemiDiscreteModel m =
        assemble(single_pipe(), gc, DiscretizationScheme::midpoint, GravityMode::none);
    REQUIRE(m.np() == 1);
    REQUIRE(m.nq() == 1);
    const double S = M_PI * 0.5 * 0.5 / 4.0;
    const double L = 10000.0;
    CHECK(m.sys.E(0, 0) == Catch::Approx(S * L / (2.0 * gc.gamma())).epsilon(1e-14));
    CHECK(m.sys.E(1, 1) == Catch::Approx(L / S).epsilon(1e-14));
    CHECK(m.sys.A(0, 1) == 1.0);   // +q into p'
    CHECK(m.sys.A(1, 0) == -1.0);  // -p into q'
    CHECK(m.sys.A(0, 0) == 0.0);
    CHECK(m.sys.A(1, 1) == 0.0);
    // supply pressure feeds the momentum row, demand flux drains the node row
    CHECK(m.sys.B(1, 0) == 1.0);  // -AS^T with AS = [-1]
    CHECK(m.sys.B(0, 1) == -1.0);
    // collocated outputs
    CHECK(m.sys.C(0, 1) == 1.0);  // delivered flux at supply = -AS q
    CHECK(m.sys.C(1, 0) == 1.0);  // demand node pressure
}

TEST_CASE("zero height delta makes all gravity modes identical", "[model]") {
    auto none = steadied_tree(DiscretizationScheme::endpoint, GravityMode::none);
    auto stat = steadied_tree(DiscretizationScheme::endpoint, GravityMode::static_p);
    auto dyn = steadied_tree(DiscretizationScheme::endpoint, GravityMode::dynamic_p);
    VectorXd dx = VectorXd::Zero(none.order());
    dx << 2e4, -1e4, 3e4, 1.5, -0.5, 2.0;
    CHECK((none.sys.nonlinear(dx) - stat.sys.nonlinear(dx)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((none.sys.nonlinear(dx) - dyn.sys.nonlinear(dx)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("midpoint and endpoint f agree at equal end pressures", "[model]") {
    SemiDiscreteModel mid =
        assemble(single_pipe(), {}, DiscretizationScheme::midpoint, GravityMode::none);
    SemiDiscreteModel end =
        assemble(single_pipe(), {}, DiscretizationScheme::endpoint, GravityMode::none);
    VectorXd sbar(1), dbar(1);
    sbar << 60e5;
    dbar << 0.0;  // zero flow: uniform steady pressure
    auto [ms, d1] = steady_state(mid, sbar, dbar);
    auto [es, d2] = steady_state(end, sbar, dbar);
    VectorXd dx(2);
    dx << 0.0, 7.5;  // flux deviation only, end pressures stay equal
    CHECK(ms.sys.nonlinear(dx) == es.sys.nonlinear(dx));
}

TEST_CASE("deviation formulation is exactly centered", "[model]") {
    auto m = steadied_tree(DiscretizationScheme::endpoint, GravityMode::dynamic_p, 25.0);
    VectorXd x0 = VectorXd::Zero(m.order()), u0 = VectorXd::Zero(m.sys.inputs());
    auto [lin, nl] = eval_rhs(m, x0, u0);
    CHECK(lin.cwiseAbs().maxCoeff() == 0.0);
    CHECK(nl.cwiseAbs().maxCoeff() == 0.0);

    // constant supply deviation: linear part is exactly B u
    VectorXd u(3);
    u << 5e4, 0.0, 0.0;
    auto [lin2, nl2] = eval_rhs(m, x0, u);
    CHECK(lin2 == VectorXd(m.sys.B * u));
    CHECK(nl2.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic Jacobian matches central differences", "[model][oracle]") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> pdist(-4e4, 4e4), qdist(-10.0, 10.0);
    for (auto scheme : {DiscretizationScheme::midpoint, DiscretizationScheme::endpoint}) {
        for (auto grav : {GravityMode::none, GravityMode::dynamic_p}) {
            auto m = steadied_tree(scheme, grav, 40.0);
            for (int trial = 0; trial < 25; ++trial) {
                VectorXd dx(m.order());
                for (int i = 0; i < m.np(); ++i) dx[i] = pdist(rng);
                for (int k = 0; k < m.nq(); ++k) dx[m.np() + k] = qdist(rng);
                MatrixXd ja = eval_jacobian(m, dx);
                MatrixXd jf = fd_jacobian(m, dx);
                double rel = (ja - jf).cwiseAbs().maxCoeff() / ja.cwiseAbs().maxCoeff();
                REQUIRE(rel < 1e-5);
            }
        }
    }
}

TEST_CASE("friction Jacobian block vanishes at zero flux", "[model]") {
    auto m = steadied_tree(DiscretizationScheme::midpoint, GravityMode::none);
    VectorXd dx = VectorXd::Zero(m.order());
    dx.tail(m.nq()) = -m.xbar.tail(m.nq());  // absolute flux = 0
    MatrixXd jf = m.sys.nonlinear_jacobian(dx);
    CHECK(jf.bottomRightCorner(m.nq(), m.nq()).cwiseAbs().maxCoeff() == 0.0);
    // and with gravity off there is no pressure sensitivity at all
    CHECK(jf.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("steady state: zero demand gives uniform pressure and zero flow", "[model]") {
    auto m = assemble(small_tree(), {}, DiscretizationScheme::endpoint, GravityMode::none);
    VectorXd sbar(1), dbar(2);
    sbar << 55e5;
    dbar << 0.0, 0.0;
    auto [ms, diag] = steady_state(m, sbar, dbar);
    CHECK(diag.converged);
    CHECK(diag.residual <= 1e-10);
    CHECK((ms.xbar.head(ms.np()).array() - 55e5).abs().maxCoeff() < 1e-6);
    CHECK(ms.xbar.tail(ms.nq()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("single-pipe steady drop matches the closed form", "[model][oracle]") {
    GasConstants gc;
    auto m = assemble(single_pipe(), gc, DiscretizationScheme::midpoint, GravityMode::none);
    VectorXd sbar(1), dbar(1);
    sbar << 60e5;
    dbar << 30.0;
    auto [ms, diag] = steady_state(m, sbar, dbar);
    const double S = M_PI * 0.25 / 4.0;
    const double lambda = nikuradse_friction(0.5, 1e-5);
    const double drop = gc.gamma() * lambda * 10000.0 * 30.0 * 30.0 / (0.5 * S * S);
    const double pout = std::sqrt(60e5 * 60e5 - drop);
    CHECK(ms.xbar[1] == Catch::Approx(30.0).epsilon(1e-12));
    CHECK(ms.xbar[0] == Catch::Approx(pout).epsilon(1e-8));
    CHECK(diag.residual <= 1e-10);
}

TEST_CASE("steady mass balance holds at every non-supply node", "[model][property]") {
    auto m = steadied_tree(DiscretizationScheme::endpoint, GravityMode::dynamic_p, 15.0);
    VectorXd demand = VectorXd::Zero(m.np());
    for (size_t i = 0; i < m.demand_ports.size(); ++i) {
        auto it = std::find(m.inc.interior_order.begin(), m.inc.interior_order.end(),
                            m.demand_ports[i]);
        demand[it - m.inc.interior_order.begin()] = m.ubar[1 + Eigen::Index(i)];
    }
    VectorXd balance = m.inc.A0 * m.xbar.tail(m.nq()) - demand;
    CHECK(balance.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("skew coupling and endpoint dissipativity", "[model][property]") {
    auto m = steadied_tree(DiscretizationScheme::endpoint, GravityMode::none);
    const int np = m.np(), nq = m.nq();
    MatrixXd apq = m.sys.A.topRightCorner(np, nq);
    MatrixXd aqp = m.sys.A.bottomLeftCorner(nq, np);
    CHECK(apq == MatrixXd(-aqp.transpose()));

    // zero-flow steady state: friction linearization vanishes, the
    // linearized operator is skew, i.e. dissipative in the E inner product
    auto m0 = assemble(small_tree(), {}, DiscretizationScheme::endpoint, GravityMode::none);
    VectorXd sbar(1), dbar(2);
    sbar << 60e5;
    dbar << 0.0, 0.0;
    auto [ms, diag] = steady_state(m0, sbar, dbar);
    MatrixXd lin = steady_linearization(ms);
    MatrixXd sym = 0.5 * (lin + lin.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
    CHECK(eig.eigenvalues().maxCoeff() <= 1e-12);
}

TEST_CASE("static and dynamic gravity agree at zero deviation", "[model][property]") {
    auto stat = steadied_tree(DiscretizationScheme::endpoint, GravityMode::static_p, 60.0);
    auto dyn = steadied_tree(DiscretizationScheme::endpoint, GravityMode::dynamic_p, 60.0);
    CHECK((stat.xbar - dyn.xbar).cwiseAbs().maxCoeff() < 1e-9);
    // flux-only deviations keep p* at its steady value: identical f
    VectorXd dx = VectorXd::Zero(stat.order());
    dx.tail(stat.nq()).setConstant(3.0);
    CHECK((stat.sys.nonlinear(dx) - dyn.sys.nonlinear(dx)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pressure underflow is reported with the node", "[model]") {
    auto m = steadied_tree(DiscretizationScheme::endpoint, GravityMode::none);
    VectorXd dx = VectorXd::Zero(m.order());
    dx[0] = -m.xbar[0] - 1.0;  // absolute pressure below zero at first node
    CHECK_THROWS_WITH(m.sys.nonlinear(dx),
                      Catch::Matchers::ContainsSubstring("pressure underflow"));
}

TEST_CASE("friction override and smooth-pipe limit", "[model]") {
    AssembleOptions opts;
    opts.friction_override = 0.0;
    auto m = assemble(single_pipe(), {}, DiscretizationScheme::midpoint, GravityMode::none, opts);
    VectorXd sbar(1), dbar(1);
    sbar << 60e5;
    dbar << 30.0;
    auto [ms, diag] = steady_state(m, sbar, dbar);
    // frictionless: no pressure drop at all
    CHECK(ms.xbar[0] == Catch::Approx(60e5).epsilon(1e-12));
    CHECK(nikuradse_friction(0.5, 0.0) == 0.0);
    CHECK(nikuradse_friction(0.5, 1e-5) > 0.0);
}
