#pragma once

// Projection-based model reduction.
//
// Training data are state snapshots from step-response simulations of the
// nonlinear model (one block per input port) and from impulse responses of
// the adjoint steady-state linearization (one block per output port).
// Bases:
//   pod_r     leading left singular vectors of the primal snapshots
//   gopod_r   POD pairs re-ranked by the output-weighted goal measure
//   dmd_r     orthonormalized dominant DMD modes of the primal snapshots
//   eds_ro_l  singular vectors of the balanced primal/dual concatenation
//   eds_wx_l  left singular vectors of the empirical cross operator
//   eds_wz_l  cross operator of the aggregated (average) system
// A trained basis is nested: truncating to the leading r columns is the
// order-r reductor.

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "gasnet/parallel.hpp"
#include "gasnet/solvers.hpp"

namespace gasnet {

inline const std::vector<std::string>& reductor_ids() {
    static const std::vector<std::string> ids = {"pod_r",    "gopod_r",  "dmd_r",
                                                 "eds_ro_l", "eds_wx_l", "eds_wz_l"};
    return ids;
}

// ---------------------------------------------------------------------------
// Snapshot collection
// ---------------------------------------------------------------------------

struct SnapshotBlock {
    std::string port;
    Eigen::MatrixXd states;  // one column per time sample
};

struct SnapshotSet {
    std::vector<SnapshotBlock> primal;  // per input port, scaled by 1/perturbation
    std::vector<SnapshotBlock> dual;    // per output port, scaled by 1/|z0|
    SnapshotBlock primal_aggregate;     // all ports excited at once (wz)
    SnapshotBlock dual_aggregate;
    double dt = 0.0;  // quadrature weight per column

    Eigen::MatrixXd primal_matrix() const { return weighted(primal); }
    Eigen::MatrixXd dual_matrix() const { return weighted(dual); }
    double theta_primal() const { return primal_matrix().norm(); }
    double theta_dual() const { return dual_matrix().norm(); }

    Eigen::MatrixXd weighted(const std::vector<SnapshotBlock>& blocks) const {
        Eigen::Index n = blocks.empty() ? 0 : blocks.front().states.rows();
        Eigen::Index cols = 0;
        for (const auto& b : blocks) cols += b.states.cols();
        Eigen::MatrixXd out(n, cols);
        Eigen::Index at = 0;
        const double w = std::sqrt(dt);
        for (const auto& b : blocks) {
            out.middleCols(at, b.states.cols()) = w * b.states;
            at += b.states.cols();
        }
        return out;
    }
};

struct TrainingSpec {
    double horizon = 0.0;         // T_train
    double dt = 0.0;
    double perturbation = 0.01;   // step size as a fraction of the steady boundary value
    int jobs = 1;
};

namespace detail {

inline OdeSystem adjoint_system(const OdeSystem& sys, const Eigen::MatrixXd& linearization) {
    OdeSystem adj;
    adj.E = sys.E.transpose();
    adj.A = linearization.transpose();
    adj.B = Eigen::MatrixXd::Zero(sys.order(), 0);
    adj.C = Eigen::MatrixXd::Zero(0, sys.order());
    adj.D = Eigen::MatrixXd::Zero(0, 0);
    return adj;
}

}  // namespace detail

/// Primal: step response of the (nonlinear) system per input port, scaled
/// back by the step magnitude. Dual: impulse response z(0) = E^{-T} C^T e_i
/// of the adjoint of the linearization at zero, integrated with the same
/// solver and normalized. Aggregate blocks excite all ports at once (the
/// average system used by eds_wz_l).
inline SnapshotSet collect_snapshots(const OdeSystem& sys, const Eigen::VectorXd& input_scales,
                                     const std::string& solver_id, const TrainingSpec& spec,
                                     const std::vector<std::string>& input_names = {},
                                     const std::vector<std::string>& output_names = {}) {
    if (!(spec.horizon > 0.0) || !(spec.dt > 0.0))
        throw ValidationError("training horizon and dt must be positive");
    if (input_scales.size() != sys.inputs())
        throw ValidationError("one perturbation scale per input port required");

    const Stepper stepper = make_stepper(solver_id);
    const Eigen::Index m = sys.inputs();
    const Eigen::Index p = sys.outputs();
    auto in_name = [&](Eigen::Index j) {
        return size_t(j) < input_names.size() ? input_names[size_t(j)] : "u" + std::to_string(j);
    };
    auto out_name = [&](Eigen::Index i) {
        return size_t(i) < output_names.size() ? output_names[size_t(i)] : "y" + std::to_string(i);
    };

    for (Eigen::Index j = 0; j < m; ++j)
        if (input_scales[j] == 0.0)
            throw NumericalError("degenerate training: port '" + in_name(j) +
                                 "' has zero steady magnitude");

    IntegrateOptions opts;
    opts.record_states = true;

    SnapshotSet set;
    set.dt = spec.dt;
    set.primal.resize(size_t(m));
    set.dual.resize(size_t(p));

    auto run_primal = [&](const Eigen::VectorXd& u_step, const std::string& label) {
        InputSignal u = [u_step](double) { return u_step; };
        try {
            Trajectory tr = integrate(sys, stepper, u, spec.horizon, spec.dt, opts);
            return tr.states;
        } catch (const NumericalError& e) {
            throw NumericalError("training simulation failed for port '" + label +
                                 "': " + e.what());
        }
    };

    const Eigen::MatrixXd lin =
        sys.A + sys.nonlinear_jacobian(Eigen::VectorXd::Zero(sys.order()));
    const OdeSystem adj = detail::adjoint_system(sys, lin);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_et(sys.E.transpose());

    auto run_dual = [&](const Eigen::VectorXd& impulse, const std::string& label) {
        Eigen::VectorXd z0 = lu_et.solve(impulse);
        double z0norm = z0.norm();
        if (z0norm == 0.0)
            throw NumericalError("degenerate training: output port '" + label +
                                 "' has zero impulse");
        IntegrateOptions dopts = opts;
        dopts.x0 = z0 / z0norm;
        try {
            Trajectory tr = integrate(adj, stepper, {}, spec.horizon, spec.dt, dopts);
            return tr.states;
        } catch (const NumericalError& e) {
            throw NumericalError("adjoint training simulation failed for port '" + label +
                                 "': " + e.what());
        }
    };

    parallel_for(int(m), spec.jobs, [&](int j) {
        Eigen::VectorXd u_step = Eigen::VectorXd::Zero(m);
        u_step[j] = input_scales[j];
        set.primal[size_t(j)] = {in_name(j), run_primal(u_step, in_name(j)) / input_scales[j]};
    });
    parallel_for(int(p), spec.jobs, [&](int i) {
        set.dual[size_t(i)] = {out_name(i), run_dual(sys.C.row(i).transpose(), out_name(i))};
    });

    set.primal_aggregate.port = "aggregate";
    set.primal_aggregate.states = run_primal(input_scales, "aggregate") / input_scales.norm();
    Eigen::VectorXd csum = sys.C.colwise().sum().transpose();
    set.dual_aggregate.port = "aggregate";
    set.dual_aggregate.states = run_dual(csum, "aggregate");

    if (!set.primal_matrix().allFinite() || !set.dual_matrix().allFinite())
        throw NumericalError("training produced non-finite snapshots");
    return set;
}

/// Model version: step magnitudes are `perturbation` x the steady boundary
/// value per port.
inline SnapshotSet collect_snapshots(const SemiDiscreteModel& model,
                                     const std::string& solver_id, const TrainingSpec& spec) {
    if (!model.steadied()) throw ValidationError("collect_snapshots requires a steadied model");
    Eigen::VectorXd scales = spec.perturbation * model.ubar.cwiseAbs();
    return collect_snapshots(model.sys, scales, solver_id, spec, model.input_names(),
                             model.output_names());
}

// ---------------------------------------------------------------------------
// Basis construction
// ---------------------------------------------------------------------------

namespace detail {

struct ThinSvd {
    Eigen::MatrixXd u;
    Eigen::VectorXd s;
    Eigen::MatrixXd v;
    Eigen::Index rank = 0;  // numerical rank at 1e-12 relative
};

inline ThinSvd thin_svd(const Eigen::MatrixXd& x, bool want_v = false) {
    unsigned flags = Eigen::ComputeThinU | (want_v ? unsigned(Eigen::ComputeThinV) : 0u);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, flags);
    ThinSvd out;
    out.u = svd.matrixU();
    out.s = svd.singularValues();
    if (want_v) out.v = svd.matrixV();
    double tol = out.s.size() ? out.s[0] * 1e-12 : 0.0;
    while (out.rank < out.s.size() && out.s[out.rank] > tol) ++out.rank;
    return out;
}

/// Largest-magnitude entry of every column made positive (reproducible signs).
inline void fix_signs(Eigen::MatrixXd& v) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        Eigen::Index imax = 0;
        v.col(j).cwiseAbs().maxCoeff(&imax);
        if (v(imax, j) < 0.0) v.col(j) = -v.col(j);
    }
}

inline Eigen::MatrixXd truncate_to_rank(const ThinSvd& svd, int r, std::string* warning,
                                        const char* who) {
    if (svd.rank == 0) throw NumericalError(std::string(who) + ": snapshot matrix is zero");
    Eigen::Index keep = std::min<Eigen::Index>(r, svd.rank);
    if (keep < r && warning)
        *warning = std::string(who) + ": requested order " + std::to_string(r) +
                   " exceeds numerical rank " + std::to_string(svd.rank) + ", truncated";
    Eigen::MatrixXd v = svd.u.leftCols(keep);
    fix_signs(v);
    return v;
}

/// Modified Gram-Schmidt that keeps column order and drops dependent
/// columns (needed for DMD mode collections).
inline Eigen::MatrixXd orthonormalize_ordered(const Eigen::MatrixXd& m, double drop_tol = 1e-10) {
    Eigen::MatrixXd q(m.rows(), m.cols());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::VectorXd v = m.col(j);
        double norm0 = v.norm();
        if (norm0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index i = 0; i < k; ++i) v -= q.col(i).dot(v) * q.col(i);
        if (v.norm() <= drop_tol * norm0) continue;
        q.col(k++) = v / v.norm();
    }
    return q.leftCols(k);
}

}  // namespace detail

/// POD: leading r left singular vectors of the (weighted) snapshot matrix.
inline Eigen::MatrixXd pod(const Eigen::MatrixXd& snapshots, int r,
                           std::string* warning = nullptr) {
    if (r < 1) throw ValidationError("reduced order must be at least 1");
    return detail::truncate_to_rank(detail::thin_svd(snapshots), r, warning, "pod");
}

/// Goal-oriented POD: POD pairs re-ranked by eta_i = sigma_i * |C u_i|_2
/// (stable, ties keep the singular-value order).
inline Eigen::MatrixXd gopod(const Eigen::MatrixXd& snapshots, const Eigen::MatrixXd& output_map,
                             int r, std::string* warning = nullptr) {
    if (r < 1) throw ValidationError("reduced order must be at least 1");
    detail::ThinSvd svd = detail::thin_svd(snapshots);
    if (svd.rank == 0) throw NumericalError("gopod: snapshot matrix is zero");
    std::vector<Eigen::Index> idx(size_t(svd.rank));
    Eigen::VectorXd eta(svd.rank);
    for (Eigen::Index i = 0; i < svd.rank; ++i) {
        idx[size_t(i)] = i;
        eta[i] = svd.s[i] * (output_map * svd.u.col(i)).norm();
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return eta[a] > eta[b]; });
    Eigen::Index keep = std::min<Eigen::Index>(r, svd.rank);
    if (keep < r && warning)
        *warning = "gopod: requested order exceeds numerical rank, truncated";
    Eigen::MatrixXd v(snapshots.rows(), keep);
    for (Eigen::Index j = 0; j < keep; ++j) v.col(j) = svd.u.col(idx[size_t(j)]);
    detail::fix_signs(v);
    return v;
}

/// DMD-Galerkin: dominant DMD modes (by eigenvalue magnitude) of the
/// per-block shift pairs, split into real/imaginary parts, orthonormalized
/// in ranking order.
inline Eigen::MatrixXd dmd_galerkin(const std::vector<Eigen::MatrixXd>& blocks, int r,
                                    std::string* warning = nullptr) {
    if (r < 1) throw ValidationError("reduced order must be at least 1");
    if (blocks.empty()) throw ValidationError("dmd: no snapshot blocks");
    Eigen::Index n = blocks.front().rows();
    Eigen::Index pairs = 0;
    for (const auto& b : blocks) {
        if (b.cols() < 2) throw ValidationError("dmd: fewer than 2 snapshots per block");
        pairs += b.cols() - 1;
    }
    Eigen::MatrixXd x0(n, pairs), x1(n, pairs);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        x0.middleCols(at, b.cols() - 1) = b.leftCols(b.cols() - 1);
        x1.middleCols(at, b.cols() - 1) = b.rightCols(b.cols() - 1);
        at += b.cols() - 1;
    }

    detail::ThinSvd svd = detail::thin_svd(x0, true);
    if (svd.rank == 0) throw NumericalError("dmd: snapshot matrix is zero");
    Eigen::Index rho = svd.rank;
    Eigen::MatrixXd atilde = svd.u.leftCols(rho).transpose() * x1 * svd.v.leftCols(rho) *
                             svd.s.head(rho).cwiseInverse().asDiagonal();

    Eigen::EigenSolver<Eigen::MatrixXd> eig(atilde);
    std::vector<Eigen::Index> order(static_cast<size_t>(rho));
    for (Eigen::Index i = 0; i < rho; ++i) order[size_t(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(eig.eigenvalues()[a]) > std::abs(eig.eigenvalues()[b]);
    });

    Eigen::MatrixXd collected(n, 2 * rho);
    Eigen::Index cols = 0;
    for (Eigen::Index i : order) {
        std::complex<double> lambda = eig.eigenvalues()[i];
        if (lambda.imag() < 0.0) continue;  // conjugate partner already handled
        Eigen::VectorXcd mode = svd.u.leftCols(rho) * eig.eigenvectors().col(i);
        collected.col(cols++) = mode.real();
        if (lambda.imag() > 0.0) collected.col(cols++) = mode.imag();
    }
    Eigen::MatrixXd q = detail::orthonormalize_ordered(collected.leftCols(cols));
    Eigen::Index keep = std::min<Eigen::Index>(r, q.cols());
    if (keep < r && warning)
        *warning = "dmd: mode space has dimension " + std::to_string(q.cols()) + ", truncated";
    Eigen::MatrixXd v = q.leftCols(keep);
    detail::fix_signs(v);
    return v;
}

/// DMD eigenvalues of the best-fit propagator (exposed for diagnostics).
inline Eigen::VectorXcd dmd_eigenvalues(const std::vector<Eigen::MatrixXd>& blocks) {
    Eigen::Index n = blocks.front().rows();
    Eigen::Index pairs = 0;
    for (const auto& b : blocks) pairs += b.cols() - 1;
    Eigen::MatrixXd x0(n, pairs), x1(n, pairs);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        x0.middleCols(at, b.cols() - 1) = b.leftCols(b.cols() - 1);
        x1.middleCols(at, b.cols() - 1) = b.rightCols(b.cols() - 1);
        at += b.cols() - 1;
    }
    detail::ThinSvd svd = detail::thin_svd(x0, true);
    Eigen::Index rho = svd.rank;
    Eigen::MatrixXd atilde = svd.u.leftCols(rho).transpose() * x1 * svd.v.leftCols(rho) *
                             svd.s.head(rho).cwiseInverse().asDiagonal();
    return Eigen::EigenSolver<Eigen::MatrixXd>(atilde, false).eigenvalues();
}

enum class EdsVariant { ro, wx, wz };

namespace detail {

/// Left singular vectors of Xc * Xo^T without densifying when n is large.
inline ThinSvd cross_operator_svd(const Eigen::MatrixXd& xc, const Eigen::MatrixXd& xo) {
    if (xc.cols() != xo.cols())
        throw ValidationError("cross operator requires matched snapshot counts "
                              "(square port configuration)");
    if (xc.rows() <= 5000) return thin_svd(xc * xo.transpose());
    // factored route: QR of both factors, SVD of the small core
    Eigen::HouseholderQR<Eigen::MatrixXd> qrc(xc), qro(xo);
    Eigen::Index kc = std::min(xc.rows(), xc.cols());
    Eigen::Index ko = std::min(xo.rows(), xo.cols());
    Eigen::MatrixXd rc = qrc.matrixQR().topRows(kc).triangularView<Eigen::Upper>();
    Eigen::MatrixXd ro = qro.matrixQR().topRows(ko).triangularView<Eigen::Upper>();
    ThinSvd core = thin_svd(rc * ro.transpose());
    ThinSvd out;
    out.s = core.s;
    out.rank = core.rank;
    out.u = Eigen::MatrixXd(qrc.householderQ() * Eigen::MatrixXd::Identity(xc.rows(), kc)) * core.u;
    return out;
}

}  // namespace detail

/// Linearized empirical-dominant-subspaces bases.
inline Eigen::MatrixXd eds(const SnapshotSet& set, EdsVariant variant, int r,
                           std::string* warning = nullptr) {
    if (r < 1) throw ValidationError("reduced order must be at least 1");
    switch (variant) {
        case EdsVariant::ro: {
            Eigen::MatrixXd xc = set.primal_matrix(), xo = set.dual_matrix();
            double tc = xc.norm(), to = xo.norm();
            if (tc == 0.0 || to == 0.0) throw NumericalError("eds: degenerate snapshot set");
            Eigen::MatrixXd both(xc.rows(), xc.cols() + xo.cols());
            both << xc / tc, xo / to;
            return detail::truncate_to_rank(detail::thin_svd(both), r, warning, "eds_ro");
        }
        case EdsVariant::wx: {
            Eigen::MatrixXd xc = set.primal_matrix(), xo = set.dual_matrix();
            if (xc.norm() == 0.0 || xo.norm() == 0.0)
                throw NumericalError("eds: degenerate snapshot set");
            return detail::truncate_to_rank(detail::cross_operator_svd(xc, xo), r, warning,
                                            "eds_wx");
        }
        case EdsVariant::wz: {
            const double w = std::sqrt(set.dt);
            Eigen::MatrixXd xc = w * set.primal_aggregate.states;
            Eigen::MatrixXd xo = w * set.dual_aggregate.states;
            if (xc.norm() == 0.0 || xo.norm() == 0.0)
                throw NumericalError("eds: degenerate snapshot set");
            return detail::truncate_to_rank(detail::cross_operator_svd(xc, xo), r, warning,
                                            "eds_wz");
        }
    }
    throw ValidationError("unknown eds variant");
}

/// Trains the full-width basis for one of the registered reductors.
inline Eigen::MatrixXd train_basis(const std::string& reductor_id, const SnapshotSet& set,
                                   const Eigen::MatrixXd& output_map, int r,
                                   std::string* warning = nullptr) {
    if (reductor_id == "pod_r") return pod(set.primal_matrix(), r, warning);
    if (reductor_id == "gopod_r") return gopod(set.primal_matrix(), output_map, r, warning);
    if (reductor_id == "dmd_r") {
        std::vector<Eigen::MatrixXd> blocks;
        for (const auto& b : set.primal) blocks.push_back(b.states);
        return dmd_galerkin(blocks, r, warning);
    }
    if (reductor_id == "eds_ro_l") return eds(set, EdsVariant::ro, r, warning);
    if (reductor_id == "eds_wx_l") return eds(set, EdsVariant::wx, r, warning);
    if (reductor_id == "eds_wz_l") return eds(set, EdsVariant::wz, r, warning);
    std::string valid;
    for (const auto& v : reductor_ids()) valid += (valid.empty() ? "" : ", ") + v;
    throw ValidationError("unknown reductor id '" + reductor_id + "' (valid: " + valid + ")");
}

// ---------------------------------------------------------------------------
// Galerkin projection and gain matching
// ---------------------------------------------------------------------------

struct RomProvenance {
    std::string reductor;
    std::string solver;
    std::string scenario_hash;
    int r = 0;
};

struct ReducedOrderModel {
    OdeSystem sys;      // E_r x_r' = A_r x_r + B_r u + f_r(x_r), y = C_r x_r + D u
    Eigen::MatrixXd V;  // n x r, orthonormal
    RomProvenance provenance;
};

inline ReducedOrderModel galerkin_project(const OdeSystem& fom, const Eigen::MatrixXd& v,
                                          RomProvenance provenance = {}) {
    if (v.cols() < 1) throw ValidationError("reduced order must be at least 1");
    if (v.rows() != fom.order()) throw ValidationError("basis row dimension mismatch");
    Eigen::MatrixXd gram = v.transpose() * v;
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() > 1e-10)
        throw ValidationError("basis is not orthonormal (deviation " +
                              csv::format_double(gram.cwiseAbs().maxCoeff()) + ")");

    ReducedOrderModel rom;
    rom.V = v;
    rom.provenance = std::move(provenance);
    rom.provenance.r = int(v.cols());
    rom.sys.E = v.transpose() * fom.E * v;
    rom.sys.A = v.transpose() * fom.A * v;
    rom.sys.B = v.transpose() * fom.B;
    rom.sys.C = fom.C * v;
    rom.sys.D = fom.D;
    if (fom.f) {
        Eigen::MatrixXd vc = v;
        auto f = fom.f;
        rom.sys.f = [vc, f](const Eigen::VectorXd& xr) {
            return Eigen::VectorXd(vc.transpose() * f(vc * xr));
        };
    }
    if (fom.f_jacobian) {
        Eigen::MatrixXd vc = v;
        auto fj = fom.f_jacobian;
        rom.sys.f_jacobian = [vc, fj](const Eigen::VectorXd& xr) {
            return Eigen::MatrixXd(vc.transpose() * fj(vc * xr) * vc);
        };
    }
    return rom;
}

/// Steady-state gain approximation S = C Q^{-1} B.
inline Eigen::MatrixXd steady_gain(const Eigen::MatrixXd& output_map,
                                   const Eigen::MatrixXd& energy_matrix,
                                   const Eigen::MatrixXd& input_map) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(energy_matrix);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        !(ldlt.vectorD().minCoeff() > 0.0))
        throw NumericalError("energy matrix is singular or indefinite");
    Eigen::MatrixXd s = output_map * ldlt.solve(input_map);
    if (!s.allFinite()) throw NumericalError("energy matrix is singular");
    return s;
}

struct GainMismatch {
    Eigen::MatrixXd D;      // outputs x inputs
    double mean_abs = 0.0;  // reported gain-error statistic
};

/// D = (C Q^{-1} B) - (C_r Q_r^{-1} B_r) with Q := E on both sides.
inline GainMismatch gain_mismatch(const OdeSystem& fom, const OdeSystem& rom) {
    GainMismatch gm;
    gm.D = steady_gain(fom.C, fom.E, fom.B) - steady_gain(rom.C, rom.E, rom.B);
    gm.mean_abs = gm.D.cwiseAbs().mean();
    return gm;
}

/// Adds D as a feedthrough so the corrected ROM gain equals the FOM gain.
inline ReducedOrderModel apply_gain_matching(const ReducedOrderModel& rom,
                                             const Eigen::MatrixXd& d) {
    if (d.rows() != rom.sys.outputs() || d.cols() != rom.sys.inputs())
        throw ValidationError("feedthrough dimension mismatch");
    ReducedOrderModel out = rom;
    out.sys.D = rom.sys.D + d;
    return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Writes V, the projected blocks, D and a provenance manifest. The manifest
/// hash is deterministic: identical configurations produce identical files.
inline void save_rom(const std::filesystem::path& dir, const ReducedOrderModel& rom,
                     const std::string& model_id, const std::string& gravity_id) {
    std::filesystem::create_directories(dir);
    csv::write_matrix_file((dir / "V.csv").string(), rom.V);
    csv::write_matrix_file((dir / "E_r.csv").string(), rom.sys.E);
    csv::write_matrix_file((dir / "A_r.csv").string(), rom.sys.A);
    csv::write_matrix_file((dir / "B_r.csv").string(), rom.sys.B);
    csv::write_matrix_file((dir / "C_r.csv").string(), rom.sys.C);
    csv::write_matrix_file((dir / "Q_r.csv").string(), rom.sys.E);  // Q := E
    csv::write_matrix_file((dir / "D.csv").string(), rom.sys.D);

    std::ostringstream blob;
    csv::write_matrix(blob, rom.V);
    blob << rom.provenance.reductor << '|' << rom.provenance.solver << '|'
         << rom.provenance.scenario_hash << '|' << rom.provenance.r << '|' << model_id << '|'
         << gravity_id;
    std::string hash = csv::hash_hex(csv::fnv1a(blob.str()));

    std::ofstream manifest(dir / "manifest.json");
    manifest << "{\n"
             << "  \"reductor\": \"" << rom.provenance.reductor << "\",\n"
             << "  \"solver\": \"" << rom.provenance.solver << "\",\n"
             << "  \"model\": \"" << model_id << "\",\n"
             << "  \"gravity\": \"" << gravity_id << "\",\n"
             << "  \"scenario_hash\": \"" << rom.provenance.scenario_hash << "\",\n"
             << "  \"order\": " << rom.provenance.r << ",\n"
             << "  \"state_dimension\": " << rom.V.rows() << ",\n"
             << "  \"hash\": \"" << hash << "\"\n"
             << "}\n";
}

}  // namespace gasnet
