#pragma once
// Spin-S algebra for a kicked-top echo laboratory.
//
// Conventions used throughout:
//   basis        |m>, m = -S..S, in increasing order (index k = m + S)
//   effective    hbar = 1/S, kick period tau = 1
//   twist        U0 = exp[-i S (alpha/2)(Sz/S - beta)^2 - i S (gamma/6)(Sz/S - j_ref)^3]
//   kick         exp(-i delta Sx), applied BEFORE the twist in a perturbed step
//
// Everything here is dense-free except the one-time Sx eigendecomposition;
// propagation works on state vectors (or member-major batches) directly.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace echotop {

using cplx = std::complex<double>;

struct SpinParameters {
    int S = 0;       // spin quantum number, positive integer
    int dim = 0;     // 2S+1
    double hbar = 0; // effective Planck constant 1/S
    double tau = 1;  // kick period

    static SpinParameters make(int S) {
        if (S < 1)
            throw std::invalid_argument(
                "SpinParameters: S must be a positive integer (got " + std::to_string(S) +
                "); half-integer spins are not representable here");
        SpinParameters p;
        p.S = S;
        p.dim = 2 * S + 1;
        p.hbar = 1.0 / static_cast<double>(S);
        p.tau = 1.0;
        return p;
    }
};

// Twist-map parameters. gamma adds a cubic term centered at j_ref; it is zero
// for the plain top and only switched on to detune the echo resonances.
struct TopParameters {
    double alpha = 1.1;
    double beta = 0.0;
    double gamma = 0.0;
    double j_ref = 0.0;
};

// Tridiagonal matrix elements of the angular momentum algebra in the Sz basis.
struct AngularMomentumOps {
    int S;
    Eigen::VectorXd m;          // diagonal of Sz
    Eigen::VectorXd sx_offdiag; // <m+1|Sx|m> = sqrt(S(S+1) - m(m+1))/2, length dim-1

    explicit AngularMomentumOps(const SpinParameters& sp) : S(sp.S) {
        const int dim = sp.dim;
        m.resize(dim);
        for (int k = 0; k < dim; ++k) m[k] = k - S;
        sx_offdiag.resize(dim - 1);
        const double s = static_cast<double>(S);
        for (int k = 0; k + 1 < dim; ++k) {
            const double mk = m[k];
            sx_offdiag[k] = 0.5 * std::sqrt(s * (s + 1.0) - mk * (mk + 1.0));
        }
    }

    int dim() const { return 2 * S + 1; }

    // out = Sx in  (tridiagonal apply)
    void apply_sx(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const {
        const int n = dim();
        out.resize(n);
        out.setZero();
        for (int k = 0; k + 1 < n; ++k) {
            out[k] += sx_offdiag[k] * in[k + 1];
            out[k + 1] += sx_offdiag[k] * in[k];
        }
    }

    // out = (Sx/S) in, the residual perturbation V
    void apply_v(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const {
        apply_sx(in, out);
        out /= static_cast<double>(S);
    }

    Eigen::MatrixXd dense_sx() const {
        const int n = dim();
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
        for (int k = 0; k + 1 < n; ++k) {
            M(k, k + 1) = sx_offdiag[k];
            M(k + 1, k) = sx_offdiag[k];
        }
        return M;
    }

    Eigen::MatrixXcd dense_sy() const {
        const int n = dim();
        Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
        // Sy = (S+ - S-)/(2i); S+ raises m, so <m+1|Sy|m> = -i <m+1|Sx|m>
        for (int k = 0; k + 1 < n; ++k) {
            M(k + 1, k) = cplx(0.0, -1.0) * sx_offdiag[k];
            M(k, k + 1) = cplx(0.0, 1.0) * sx_offdiag[k];
        }
        return M;
    }

    Eigen::MatrixXd dense_sz() const { return m.asDiagonal(); }
};

// Diagonal one-step twist. Eigenphases phi_m are kept explicitly so the
// Heisenberg picture (phases times t) and the degeneracy diagnostics can
// reuse them.
struct UnperturbedPropagator {
    Eigen::VectorXd phases;       // phi_m
    Eigen::VectorXcd step_factor; // exp(-i phi_m)

    UnperturbedPropagator(const SpinParameters& sp, const TopParameters& top) {
        const int dim = sp.dim;
        const double S = static_cast<double>(sp.S);
        phases.resize(dim);
        step_factor.resize(dim);
        for (int k = 0; k < dim; ++k) {
            const double j = (k - sp.S) / S;
            const double dq = j - top.beta;
            const double dc = j - top.j_ref;
            phases[k] = S * (top.alpha / 2.0) * dq * dq + S * (top.gamma / 6.0) * dc * dc * dc;
            step_factor[k] = std::exp(cplx(0.0, -phases[k]));
        }
    }

    void step(Eigen::VectorXcd& psi) const { psi.array() *= step_factor.array(); }

    // batch layout: one member per row, dim along columns
    void step_batch(Eigen::MatrixXcd& psi) const {
        psi.array().rowwise() *= step_factor.transpose().array();
    }
};

// One kick exp(-i delta Sx).
//
// Two interchangeable implementations:
//  * eigenbasis apply through the one-time tridiagonal eigendecomposition of Sx
//    (exact up to the solver, O(dim^2) per kick);
//  * Chebyshev expansion of exp(-i z x) on the spectrum of Sx/S in [-1,1]
//    (O(K dim) per kick, K set by delta*S; used for long batched runs).
// The two agree to ~1e-12; the unit tests pin that.
struct KickPropagator {
    double delta = 0.0;
    Eigen::VectorXd eigvals; // spectrum of Sx (the integers -S..S up to roundoff)
    Eigen::MatrixXd eigvecs; // real orthogonal
    Eigen::VectorXcd kick_phase; // exp(-i delta eigvals)

    // Chebyshev data for the fast path
    int S = 0;
    Eigen::VectorXd couplings; // sx_offdiag / S
    std::vector<cplx> cheb;    // coefficients (2-delta_k0)(-i)^k J_k(delta S)

    KickPropagator(const AngularMomentumOps& ops, double delta_) { init(ops, delta_); }

    // Rebind to a new kick angle, reusing the eigendecomposition (it does not
    // depend on delta). Cheap enough for delta sweeps.
    KickPropagator(const KickPropagator& other, double new_delta) {
        delta = new_delta;
        eigvals = other.eigvals;
        eigvecs = other.eigvecs;
        S = other.S;
        couplings = other.couplings;
        rebuild_delta_tables();
    }

    void apply_eigen(Eigen::VectorXcd& psi) const {
        Eigen::VectorXcd tmp = eigvecs.transpose() * psi;
        tmp.array() *= kick_phase.array();
        psi.noalias() = eigvecs * tmp;
    }

    void apply_chebyshev(Eigen::VectorXcd& psi) const {
        const int n = static_cast<int>(psi.size());
        Eigen::VectorXcd t0 = psi, t1(n), tn(n), acc(n);
        apply_x(t0, t1);
        acc = cheb[0] * t0 + cheb[1] * t1;
        for (size_t k = 2; k < cheb.size(); ++k) {
            apply_x(t1, tn);
            tn = 2.0 * tn - t0;
            acc += cheb[k] * tn;
            t0.swap(t1);
            t1.swap(tn);
        }
        psi = acc;
    }

    // batch layout: member-major (rows = ensemble members, cols = dim), so the
    // tridiagonal apply works on contiguous columns
    void apply_chebyshev_batch(Eigen::MatrixXcd& psi, Eigen::MatrixXcd& t0, Eigen::MatrixXcd& t1,
                               Eigen::MatrixXcd& tn, Eigen::MatrixXcd& acc) const {
        t0 = psi;
        apply_x_batch(t0, t1);
        acc = cheb[0] * t0 + cheb[1] * t1;
        for (size_t k = 2; k < cheb.size(); ++k) {
            apply_x_batch(t1, tn);
            tn = 2.0 * tn - t0;
            acc += cheb[k] * tn;
            t0.swap(t1);
            t1.swap(tn);
        }
        psi.swap(acc);
    }

  private:
    void init(const AngularMomentumOps& ops, double delta_) {
        delta = delta_;
        S = ops.S;
        couplings = ops.sx_offdiag / static_cast<double>(ops.S);
        const int dim = ops.dim();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
        solver.computeFromTridiagonal(Eigen::VectorXd::Zero(dim), ops.sx_offdiag,
                                      Eigen::ComputeEigenvectors);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("KickPropagator: tridiagonal eigensolver failed to converge");
        eigvals = solver.eigenvalues();
        eigvecs = solver.eigenvectors();
        rebuild_delta_tables();
    }

    void rebuild_delta_tables() {
        kick_phase.resize(eigvals.size());
        for (Eigen::Index i = 0; i < eigvals.size(); ++i)
            kick_phase[i] = std::exp(cplx(0.0, -delta * eigvals[i]));

        // exp(-i z x) = sum_k (2 - delta_k0) (-i)^k J_k(z) T_k(x) on x in [-1,1].
        // Truncate once the Bessel tail is dead; per-kick truncation error is
        // roughly the first dropped coefficient, so 1e-15 keeps 1e6-step runs
        // comfortably below observable levels.
        const double z = delta * static_cast<double>(S);
        const double az = std::abs(z);
        cheb.clear();
        const cplx mi(0.0, -1.0);
        cplx ik(1.0, 0.0);
        int consecutive_small = 0;
        const int kmax = 64 + static_cast<int>(2.0 * az);
        for (int k = 0; k <= kmax; ++k) {
            double jk = std::cyl_bessel_j(static_cast<double>(k), az);
            if (z < 0 && (k % 2 == 1)) jk = -jk; // J_k(-z) = (-1)^k J_k(z)
            cheb.push_back((k == 0 ? 1.0 : 2.0) * ik * jk);
            ik *= mi;
            if (k > az && std::abs(jk) < 1e-15) {
                if (++consecutive_small >= 2) break;
            } else {
                consecutive_small = 0;
            }
        }
        if (cheb.size() < 2) cheb.resize(2, cplx(0.0, 0.0)); // keep the recurrence well-formed
    }

    void apply_x(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const {
        const int n = static_cast<int>(in.size());
        out.resize(n);
        out.setZero();
        for (int k = 0; k + 1 < n; ++k) {
            out[k] += couplings[k] * in[k + 1];
            out[k + 1] += couplings[k] * in[k];
        }
    }

    void apply_x_batch(const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const {
        const int n = static_cast<int>(in.cols());
        out.resize(in.rows(), n);
        out.col(0) = couplings[0] * in.col(1);
        out.col(n - 1) = couplings[n - 2] * in.col(n - 2);
        for (int k = 1; k + 1 < n; ++k)
            out.col(k) = couplings[k - 1] * in.col(k - 1) + couplings[k] * in.col(k + 1);
    }
};

} // namespace echotop
