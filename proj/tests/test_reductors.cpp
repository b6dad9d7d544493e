#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "gasnet/reductors.hpp"
#include "helpers.hpp"

using namespace gasnet;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// principal-angle distance between the column spans of two orthonormal
// bases, sine-based so tiny angles resolve below the acos(1-eps) floor
double max_principal_angle(const MatrixXd& qa, const MatrixXd& qb) {
    MatrixXd residual = qb - qa * (qa.transpose() * qb);
    Eigen::BDCSVD<MatrixXd> svd(residual);
    double smax = svd.singularValues().size() ? svd.singularValues().maxCoeff() : 0.0;
    return std::asin(std::min(1.0, smax));
}

MatrixXd orth(const MatrixXd& x) {
    Eigen::BDCSVD<MatrixXd> svd(x, Eigen::ComputeThinU);
    Eigen::Index rank = 0;
    double tol = svd.singularValues()[0] * 1e-10;
    while (rank < svd.singularValues().size() && svd.singularValues()[rank] > tol) ++rank;
    return svd.matrixU().leftCols(rank);
}

/// Symmetric SISO system (A = A^T, B = C^T, E = I); the input direction
/// spans only the two slowest eigenvectors, so primal and dual snapshots
/// live in the same invariant subspace.
struct SymmetricSiso {
    OdeSystem sys;
    MatrixXd a;
    VectorXd b;
};

SymmetricSiso make_symmetric_siso() {
    SymmetricSiso s;
    MatrixXd q(4, 4);
    q << 1, 1, 1, 1, 1, -1, 1, -1, 1, 1, -1, -1, 1, -1, -1, 1;
    q /= 2.0;
    VectorXd lam(4);
    lam << -0.3, -1.0, -2.5, -4.0;
    s.a = q * lam.asDiagonal() * q.transpose();
    s.b = q.col(0) + 0.7 * q.col(1);
    s.sys.E = MatrixXd::Identity(4, 4);
    s.sys.A = s.a;
    s.sys.B = s.b;
    s.sys.C = s.b.transpose();
    s.sys.D = MatrixXd::Zero(1, 1);
    return s;
}

SnapshotSet symmetric_snapshots(const SymmetricSiso& s, double T = 1.0, double dt = 0.01) {
    TrainingSpec spec;
    spec.horizon = T;
    spec.dt = dt;
    return collect_snapshots(s.sys, VectorXd::Ones(1), "imex1", spec);
}

}  // namespace

TEST_CASE("snapshot bookkeeping: m blocks of N+1 columns", "[reductors]") {
    auto model = testutil::tree_model();
    TrainingSpec spec;
    spec.horizon = 600.0;
    spec.dt = 60.0;
    SnapshotSet set = collect_snapshots(model, "imex1", spec);
    REQUIRE(set.primal.size() == 3);  // 1 supply + 2 demands
    REQUIRE(set.dual.size() == 3);
    for (const auto& b : set.primal) CHECK(b.states.cols() == 11);  // N+1
    CHECK(set.primal_matrix().cols() == 33);
    CHECK(set.primal_matrix().rows() == model.order());
    CHECK(set.theta_primal() > 0.0);
    CHECK(set.theta_dual() > 0.0);
    CHECK(set.primal_aggregate.states.cols() == 11);
}

TEST_CASE("zero perturbation scale is rejected as degenerate", "[reductors]") {
    auto net = testutil::tree_network();
    auto m = assemble(net, {}, DiscretizationScheme::endpoint, GravityMode::none);
    VectorXd s(1), d(2);
    s << 60e5;
    d << 25.0, 0.0;  // second demand port idle at t=0
    auto steadied = steady_state(m, s, d).first;
    TrainingSpec spec;
    spec.horizon = 600.0;
    spec.dt = 60.0;
    CHECK_THROWS_WITH(collect_snapshots(steadied, "imex1", spec),
                      Catch::Matchers::ContainsSubstring("degenerate training"));
}

TEST_CASE("snapshot trajectories match the matrix-exponential oracle", "[reductors][oracle]") {
    SymmetricSiso s = make_symmetric_siso();
    const double T = 1.0, dt = 0.01;
    SnapshotSet set = symmetric_snapshots(s, T, dt);

    Eigen::PartialPivLU<MatrixXd> alu(s.a);
    const MatrixXd& xc = set.primal[0].states;
    const MatrixXd& xo = set.dual[0].states;
    VectorXd z0 = s.b / s.b.norm();
    for (int k = 0; k <= 100; k += 20) {
        double t = k * dt;
        MatrixXd phi = (t * s.a).exp();
        // step response of x' = A x + b (unit step), x(0) = 0
        VectorXd x_exact = alu.solve((phi - MatrixXd::Identity(4, 4)) * s.b);
        // adjoint impulse response z' = A^T z, z(0) = b/|b|
        VectorXd z_exact = phi.transpose() * z0;
        CHECK((xc.col(k) - x_exact).norm() <= 0.05 * std::max(1.0, x_exact.norm()));
        CHECK((xo.col(k) - z_exact).norm() <= 0.05 * std::max(1.0, z_exact.norm()));
    }

    // self-adjoint configuration: both families span the same invariant
    // subspace of A
    double angle = max_principal_angle(orth(xc), orth(xo));
    CHECK(orth(xc).cols() == 2);
    CHECK(angle < 1e-6);
}

TEST_CASE("pod basics", "[reductors]") {
    SECTION("rank-1 toy") {
        MatrixXd x(2, 2);
        x << 1, 2, 0, 0;
        MatrixXd v = pod(x, 1);
        CHECK(v(0, 0) == Catch::Approx(1.0).epsilon(1e-14));
        CHECK(v(1, 0) == Catch::Approx(0.0).margin(1e-14));
    }
    SECTION("requested order beyond rank truncates with warning") {
        MatrixXd x(3, 4);
        x.setZero();
        x.row(0) << 1, 2, 3, 4;
        std::string warning;
        MatrixXd v = pod(x, 3, &warning);
        CHECK(v.cols() == 1);
        CHECK_FALSE(warning.empty());
    }
    SECTION("full order reproduces the snapshots") {
        std::mt19937 rng(7);
        std::normal_distribution<double> dist;
        MatrixXd x(6, 40);
        for (int i = 0; i < x.size(); ++i) x.data()[i] = dist(rng);
        MatrixXd v = pod(x, 6);
        CHECK((x - v * v.transpose() * x).norm() < 1e-10 * x.norm());
    }
    SECTION("r = 0 is rejected") {
        MatrixXd x = MatrixXd::Random(3, 3);
        CHECK_THROWS_AS(pod(x, 0), ValidationError);
    }
}

TEST_CASE("pod optimality: projection error equals the tail energy", "[reductors][oracle]") {
    std::mt19937 rng(2024);
    std::normal_distribution<double> dist;
    // correlated snapshots with decaying spectrum
    MatrixXd base(200, 12), coef(12, 2000);
    for (int i = 0; i < base.size(); ++i) base.data()[i] = dist(rng);
    for (int i = 0; i < coef.size(); ++i) coef.data()[i] = dist(rng);
    for (int j = 0; j < 12; ++j) coef.row(j) *= std::pow(0.4, j);
    MatrixXd x = base * coef;
    for (int j = 0; j < x.cols(); ++j) x.col(j) += 1e-6 * VectorXd::NullaryExpr(200, [&](int) {
        return dist(rng);
    });

    Eigen::BDCSVD<MatrixXd> svd(x);  // oracle spectrum
    const VectorXd& sv = svd.singularValues();
    for (int r : {1, 4, 9}) {
        MatrixXd v = pod(x, r);
        double err2 = (x - v * v.transpose() * x).squaredNorm();
        double tail = sv.tail(sv.size() - r).squaredNorm();
        CHECK(err2 == Catch::Approx(tail).epsilon(1e-8));
    }
}

TEST_CASE("gopod re-ranks by the output-weighted measure", "[reductors]") {
    MatrixXd u(3, 2);
    u << 1, 0, 0, 1, 0, 0;
    MatrixXd x(3, 4);
    x = u.col(0) * Eigen::RowVector4d(4, 4, 4, 4) + u.col(1) * Eigen::RowVector4d(1, -1, 1, -1);

    SECTION("scaled identity output map keeps the pod order") {
        MatrixXd c = 2.0 * MatrixXd::Identity(3, 3);
        CHECK(gopod(x, c, 2) == pod(x, 2));
    }
    SECTION("annihilating the dominant mode promotes the second") {
        MatrixXd c(1, 3);
        c << 0, 1, 0;  // kills u1 = e1, keeps u2 = e2
        MatrixXd v = gopod(x, c, 1);
        CHECK(std::abs(v(1, 0)) == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("full-rank span equals the pod span") {
        MatrixXd c(1, 3);
        c << 0.3, 1.7, 0.0;
        MatrixXd vg = gopod(x, c, 2);
        MatrixXd vp = pod(x, 2);
        CHECK(max_principal_angle(vg, vp) < 1e-10);
    }
}

TEST_CASE("dmd identifies propagator spectra", "[reductors][oracle]") {
    SECTION("scalar geometric sequence") {
        double lambda = 0.83;
        MatrixXd block(1, 12);
        for (int k = 0; k < 12; ++k) block(0, k) = std::pow(lambda, k);
        Eigen::VectorXcd ev = dmd_eigenvalues({block});
        REQUIRE(ev.size() == 1);
        CHECK(std::abs(ev[0] - std::complex<double>(lambda, 0)) < 1e-12);
    }
    SECTION("matrix propagator eigenvalues within 1e-6") {
        MatrixXd a(3, 3);
        a << -1.0, 0.3, 0.0, 0.3, -2.0, 0.4, 0.0, 0.4, -0.5;
        MatrixXd g = (0.1 * a).exp();  // discrete propagator, symmetric
        std::mt19937 rng(5);
        std::normal_distribution<double> dist;
        std::vector<MatrixXd> blocks;
        for (int b = 0; b < 2; ++b) {
            MatrixXd blk(3, 30);
            VectorXd x = VectorXd::NullaryExpr(3, [&](int) { return dist(rng); });
            for (int k = 0; k < 30; ++k) {
                blk.col(k) = x;
                x = g * x;
            }
            blocks.push_back(blk);
        }
        Eigen::VectorXcd ev = dmd_eigenvalues(blocks);
        std::vector<double> got;
        for (int i = 0; i < ev.size(); ++i) got.push_back(ev[i].real());
        std::sort(got.begin(), got.end());
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g);
        for (int i = 0; i < 3; ++i) CHECK(got[size_t(i)] == Catch::Approx(eig.eigenvalues()[i]).margin(1e-6));
    }
    SECTION("rank-1 data returns the data direction") {
        VectorXd dir(3);
        dir << 2, -1, 2;
        dir.normalize();
        MatrixXd block(3, 8);
        for (int k = 0; k < 8; ++k) block.col(k) = std::pow(0.9, k) * dir;
        MatrixXd v = dmd_galerkin({block}, 1);
        CHECK(std::abs(std::abs(v.col(0).dot(dir)) - 1.0) < 1e-12);
    }
    SECTION("a single snapshot per block is rejected") {
        MatrixXd block(3, 1);
        block.setOnes();
        CHECK_THROWS_WITH(dmd_galerkin({block}, 1),
                          Catch::Matchers::ContainsSubstring("fewer than 2"));
    }
}

TEST_CASE("eds variants", "[reductors]") {
    SECTION("identical primal and dual sets degenerate to pod") {
        SymmetricSiso s = make_symmetric_siso();
        SnapshotSet set = symmetric_snapshots(s);
        set.dual = set.primal;  // force X_O = X_C
        MatrixXd v_eds = eds(set, EdsVariant::ro, 2);
        MatrixXd v_pod = pod(set.primal_matrix(), 2);
        CHECK((v_eds - v_pod).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("complementary directions are both retained") {
        SnapshotSet set;
        set.dt = 1.0;
        set.primal = {{"u0", MatrixXd::Identity(2, 2).col(0)}};
        set.dual = {{"y0", MatrixXd::Identity(2, 2).col(1)}};
        MatrixXd v = eds(set, EdsVariant::ro, 2);
        REQUIRE(v.cols() == 2);
        CHECK(std::abs(v.determinant()) == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("wx directions agree with ro on a symmetric SISO system") {
        SymmetricSiso s = make_symmetric_siso();
        SnapshotSet set = symmetric_snapshots(s);
        MatrixXd v_wx = eds(set, EdsVariant::wx, 2);
        MatrixXd v_ro = eds(set, EdsVariant::ro, 2);
        CHECK(max_principal_angle(v_wx, v_ro) < 1e-3);
    }
    SECTION("wz builds from the aggregate blocks") {
        SymmetricSiso s = make_symmetric_siso();
        SnapshotSet set = symmetric_snapshots(s);
        MatrixXd v = eds(set, EdsVariant::wz, 2);
        CHECK(v.cols() == 2);
        // SISO: the average system is the system itself
        CHECK(max_principal_angle(v, eds(set, EdsVariant::wx, 2)) < 1e-6);
    }
    SECTION("degenerate sets are rejected") {
        SnapshotSet set;
        set.dt = 1.0;
        set.primal = {{"u0", MatrixXd::Zero(2, 3)}};
        set.dual = {{"y0", MatrixXd::Identity(2, 2)}};
        CHECK_THROWS_AS(eds(set, EdsVariant::ro, 1), NumericalError);
    }
}

TEST_CASE("galerkin projection", "[reductors]") {
    auto model = testutil::tree_model();
    const Eigen::Index n = model.order();

    SECTION("identity basis reproduces the full model bit for bit") {
        MatrixXd eye = MatrixXd::Identity(n, n);
        ReducedOrderModel rom = galerkin_project(model.sys, eye);
        CHECK(rom.sys.E == model.sys.E);
        CHECK(rom.sys.A == model.sys.A);
        auto u = [m = model.sys.inputs()](double t) {
            VectorXd v = VectorXd::Zero(m);
            v[1] = 1.5 * std::min(t / 600.0, 1.0);
            return v;
        };
        Trajectory a = integrate(model.sys, make_stepper("imex1"), u, 1200.0, 30.0);
        Trajectory b = integrate(rom.sys, make_stepper("imex1"), u, 1200.0, 30.0);
        CHECK(std::memcmp(a.outputs.data(), b.outputs.data(),
                          sizeof(double) * a.outputs.size()) == 0);
    }
    SECTION("zero-width and non-orthonormal bases are rejected") {
        CHECK_THROWS_AS(galerkin_project(model.sys, MatrixXd(n, 0)), ValidationError);
        MatrixXd bad = MatrixXd::Identity(n, 2);
        bad(0, 1) = 0.5;
        CHECK_THROWS_WITH(galerkin_project(model.sys, bad),
                          Catch::Matchers::ContainsSubstring("orthonormal"));
    }
    SECTION("congruence keeps E_r symmetric positive definite") {
        MatrixXd v = pod(MatrixXd::Random(n, 30), 4);
        ReducedOrderModel rom = galerkin_project(model.sys, v);
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (rom.sys.E + rom.sys.E.transpose()));
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("steady gain arithmetic", "[reductors]") {
    MatrixXd c = MatrixXd::Constant(1, 1, 2.0);
    MatrixXd q = MatrixXd::Constant(1, 1, 4.0);
    MatrixXd b = MatrixXd::Constant(1, 1, 3.0);
    CHECK(steady_gain(c, q, b)(0, 0) == Catch::Approx(1.5).epsilon(1e-15));
    CHECK(steady_gain(c, MatrixXd::Identity(1, 1), b)(0, 0) == 6.0);
    CHECK_THROWS_AS(steady_gain(c, MatrixXd::Zero(1, 1), b), NumericalError);
}

TEST_CASE("gain mismatch and matching", "[reductors]") {
    auto model = testutil::tree_model();
    const Eigen::Index n = model.order();

    SECTION("identity projection has zero mismatch") {
        ReducedOrderModel rom = galerkin_project(model.sys, MatrixXd::Identity(n, n));
        GainMismatch gm = gain_mismatch(model.sys, rom.sys);
        CHECK(gm.D.cwiseAbs().maxCoeff() == 0.0);
        ReducedOrderModel same = apply_gain_matching(rom, gm.D);
        CHECK(same.sys.D == rom.sys.D);
    }

    SECTION("dropping a state of a diagonal system leaves its contribution") {
        OdeSystem fom;
        fom.E = MatrixXd::Identity(2, 2);
        fom.A = -MatrixXd::Identity(2, 2);
        fom.B = MatrixXd::Ones(2, 1);
        fom.C = MatrixXd::Ones(1, 2);
        fom.D = MatrixXd::Zero(1, 1);
        ReducedOrderModel rom = galerkin_project(fom, MatrixXd::Identity(2, 1));
        GainMismatch gm = gain_mismatch(fom, rom.sys);
        CHECK(gm.D(0, 0) == Catch::Approx(1.0).epsilon(1e-14));  // c2 b2 / q22
    }

    SECTION("swapping roles flips the sign") {
        MatrixXd v = pod(MatrixXd::Random(n, 20), 3);
        ReducedOrderModel rom = galerkin_project(model.sys, v);
        GainMismatch ab = gain_mismatch(model.sys, rom.sys);
        GainMismatch ba = gain_mismatch(rom.sys, model.sys);
        CHECK((ab.D + ba.D).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + ab.D.cwiseAbs().maxCoeff()));
    }

    SECTION("corrected gain equals the full gain for every order") {
        TrainingSpec spec;
        spec.horizon = 3600.0;
        spec.dt = 60.0;
        SnapshotSet set = collect_snapshots(model, "imex1", spec);
        MatrixXd basis = train_basis("pod_r", set, model.sys.C, int(n));
        MatrixXd s_fom = steady_gain(model.sys.C, model.sys.E, model.sys.B);
        double scale = std::max(1.0, s_fom.cwiseAbs().maxCoeff());
        for (int r = 1; r <= basis.cols(); ++r) {
            ReducedOrderModel rom = galerkin_project(model.sys, basis.leftCols(r));
            GainMismatch gm = gain_mismatch(model.sys, rom.sys);
            ReducedOrderModel fixed = apply_gain_matching(rom, gm.D);
            MatrixXd corrected =
                steady_gain(fixed.sys.C, fixed.sys.E, fixed.sys.B) + fixed.sys.D;
            CHECK((corrected - s_fom).cwiseAbs().maxCoeff() <= 1e-12 * scale);
        }
    }

    SECTION("long-run response of the corrected ROM reaches the full gain") {
        // A = -E makes S = C E^{-1} B the true DC gain as well
        OdeSystem fom;
        VectorXd e(2);
        e << 2.0, 0.5;
        fom.E = e.asDiagonal();
        fom.A = -fom.E;
        fom.B = (VectorXd(2) << 1.0, 0.6).finished();
        fom.C = (Eigen::RowVectorXd(2) << 0.8, 1.2).finished();
        fom.D = MatrixXd::Zero(1, 1);
        MatrixXd v = MatrixXd::Identity(2, 1);
        ReducedOrderModel rom = galerkin_project(fom, v);
        ReducedOrderModel fixed = apply_gain_matching(rom, gain_mismatch(fom, rom.sys).D);

        auto u = testutil::constant_input(VectorXd::Ones(1));
        Trajectory yf = integrate(fom, make_stepper("imex1"), u, 40.0, 0.02);
        Trajectory yr = integrate(fixed.sys, make_stepper("imex1"), u, 40.0, 0.02);
        double yf_end = yf.outputs(0, yf.samples() - 1);
        double yr_end = yr.outputs(0, yr.samples() - 1);
        CHECK(std::abs(yf_end - yr_end) < 1e-6);
        // and the uncorrected ROM does not
        Trajectory yu = integrate(rom.sys, make_stepper("imex1"), u, 40.0, 0.02);
        CHECK(std::abs(yf_end - yu.outputs(0, yu.samples() - 1)) > 1e-3);
    }
}

TEST_CASE("rom persistence has a deterministic manifest", "[reductors]") {
    auto model = testutil::tree_model();
    TrainingSpec spec;
    spec.horizon = 600.0;
    spec.dt = 60.0;
    SnapshotSet set = collect_snapshots(model, "imex1", spec);
    MatrixXd basis = train_basis("pod_r", set, model.sys.C, 4);
    ReducedOrderModel rom =
        galerkin_project(model.sys, basis, {"pod_r", "imex1", "cafe", 4});

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "gasnet_rom_test";
    fs::remove_all(dir);
    save_rom(dir / "a", rom, "ode_end", "none");
    save_rom(dir / "b", rom, "ode_end", "none");
    for (const char* f : {"V.csv", "E_r.csv", "A_r.csv", "B_r.csv", "C_r.csv", "Q_r.csv",
                          "D.csv", "manifest.json"})
        CHECK(fs::exists(dir / "a" / f));
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };
    CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
    Eigen::MatrixXd v_back = csv::read_matrix_file((dir / "a" / "V.csv").string());
    CHECK((v_back - rom.V).cwiseAbs().maxCoeff() == 0.0);  // %.17g round-trip
    fs::remove_all(dir);
}
