#pragma once
// Exact echo dynamics: fidelity traces f(t) = <psi_delta(t)|psi_0(t)>, the
// integrated perturbation operator Sigma_t, its second-order companion
// Gamma_t, the doubly-averaged perturbation, and two-time correlations.
//
// The trace runner never forms a propagator matrix; it co-evolves the two
// branches as vectors. The dense operators exist as small-S oracles and are
// gated accordingly.

#include "spin.hpp"
#include "states.hpp"

#include <optional>
#include <vector>

namespace echotop {

struct DegenerateSpectrum : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FidelityTrace {
    std::vector<long> times;
    Eigen::VectorXcd amplitude; // f(t), complex; the phase matters downstream
    Eigen::VectorXd fidelity;   // F(t) = |f(t)|^2
};

enum class KickMethod { EigenBasis, Chebyshev };

namespace detail {
inline void check_state(const Eigen::VectorXcd& psi, int dim) {
    if (psi.size() != dim)
        throw std::invalid_argument("state dimension " + std::to_string(psi.size()) +
                                    " does not match propagator dimension " +
                                    std::to_string(dim));
    if (std::abs(psi.norm() - 1.0) > 1e-8)
        throw std::invalid_argument("initial state is not normalized (||psi|| deviates by " +
                                    std::to_string(std::abs(psi.norm() - 1.0)) + ")");
}

inline void check_dense_gate(int dim, bool allow_large, const char* what) {
    // dense oracles are O(dim^2) storage; keep them out of production-size runs
    if (dim > 257 && !allow_large)
        throw std::invalid_argument(std::string(what) +
                                    ": dense oracle gated to S <= 128; pass allow_large=true "
                                    "if you really want dim=" +
                                    std::to_string(dim));
}
} // namespace detail

// Evolve |psi_0> with the twist alone and |psi_delta> with kick-then-twist,
// recording the overlap every `stride` kicks (t=0 included).
inline FidelityTrace run_fidelity(const Eigen::VectorXcd& psi, const UnperturbedPropagator& u0,
                                  const KickPropagator& kick, long t_max, long stride,
                                  KickMethod method = KickMethod::Chebyshev) {
    if (t_max < 0 || stride < 1)
        throw std::invalid_argument("run_fidelity: need t_max >= 0 and stride >= 1");
    detail::check_state(psi, static_cast<int>(u0.phases.size()));

    FidelityTrace tr;
    const long nrec = t_max / stride + 1;
    tr.times.reserve(nrec);
    tr.amplitude.resize(nrec);
    tr.fidelity.resize(nrec);

    Eigen::VectorXcd pu = psi, pp = psi;
    long rec = 0;
    tr.times.push_back(0);
    tr.amplitude[rec] = pp.dot(pu); // <psi_delta|psi_0>, conjugation on the left
    tr.fidelity[rec] = std::norm(tr.amplitude[rec]);
    ++rec;
    for (long t = 1; t <= t_max; ++t) {
        if (method == KickMethod::Chebyshev)
            kick.apply_chebyshev(pp);
        else
            kick.apply_eigen(pp);
        u0.step(pp);
        u0.step(pu);
        if (t % stride == 0) {
            tr.times.push_back(t);
            tr.amplitude[rec] = pp.dot(pu);
            tr.fidelity[rec] = std::norm(tr.amplitude[rec]);
            ++rec;
        }
    }
    return tr;
}

// Ensemble trace, amplitude-level: keeps the member mean of f(t) (that is what
// the freeze plateau of random states is made of) alongside the member mean of
// F(t) with its standard error.
struct EnsembleTrace {
    std::vector<long> times;
    Eigen::VectorXcd mean_amplitude;  // <f(t)> over members
    Eigen::VectorXd fidelity_of_mean; // |<f(t)>|^2
    Eigen::VectorXd mean_fidelity;    // <|f(t)|^2>
    Eigen::VectorXd stderr_fidelity;  // standard error of mean_fidelity
    Eigen::MatrixXcd per_member;      // optional: member f traces (members x samples)
};

inline EnsembleTrace run_fidelity_ensemble(const Eigen::MatrixXcd& states,
                                           const UnperturbedPropagator& u0,
                                           const KickPropagator& kick, long t_max, long stride,
                                           bool keep_members = false) {
    if (t_max < 0 || stride < 1)
        throw std::invalid_argument("run_fidelity_ensemble: need t_max >= 0 and stride >= 1");
    const int dim = static_cast<int>(u0.phases.size());
    if (states.cols() != dim)
        throw std::invalid_argument("ensemble layout must be members x dim");
    const int members = static_cast<int>(states.rows());
    for (int r = 0; r < members; ++r)
        if (std::abs(states.row(r).norm() - 1.0) > 1e-8)
            throw std::invalid_argument("ensemble member " + std::to_string(r) +
                                        " is not normalized");

    EnsembleTrace tr;
    const long nrec = t_max / stride + 1;
    tr.mean_amplitude.resize(nrec);
    tr.fidelity_of_mean.resize(nrec);
    tr.mean_fidelity.resize(nrec);
    tr.stderr_fidelity.resize(nrec);
    if (keep_members) tr.per_member.resize(members, nrec);

    Eigen::MatrixXcd pu = states, pp = states;
    Eigen::MatrixXcd w0, w1, w2, w3; // chebyshev workspace, reused across steps
    Eigen::VectorXcd f(members);
    long rec = 0;
    auto record = [&](long t) {
        f = (pp.conjugate().cwiseProduct(pu)).rowwise().sum();
        const cplx fm = f.mean();
        tr.times.push_back(t);
        tr.mean_amplitude[rec] = fm;
        tr.fidelity_of_mean[rec] = std::norm(fm);
        double s1 = 0;
        for (int r = 0; r < members; ++r) {
            s1 += std::norm(f[r]);
            if (keep_members) tr.per_member(r, rec) = f[r];
        }
        const double mean = s1 / members;
        tr.mean_fidelity[rec] = mean;
        // centered second pass: the naive sum-of-squares form cancels badly
        // when all members sit near the same value (t = 0 most of all)
        double ss = 0;
        for (int r = 0; r < members; ++r) {
            const double d = std::norm(f[r]) - mean;
            ss += d * d;
        }
        tr.stderr_fidelity[rec] =
            members > 1 ? std::sqrt(ss / (members - 1) / members) : 0.0;
        ++rec;
    };

    record(0);
    for (long t = 1; t <= t_max; ++t) {
        kick.apply_chebyshev_batch(pp, w0, w1, w2, w3);
        u0.step_batch(pp);
        u0.step_batch(pu);
        if (t % stride == 0) record(t);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Heisenberg-picture operators (dense, small-S oracles)
// ---------------------------------------------------------------------------

// V_t = U0^-t V U0^t with V = Sx/S; (V_t)_nm = V_nm exp(i (phi_n - phi_m) t).
inline Eigen::MatrixXcd heisenberg_v(const AngularMomentumOps& ops,
                                     const UnperturbedPropagator& u0, long t,
                                     bool allow_large = false) {
    const int dim = ops.dim();
    detail::check_dense_gate(dim, allow_large, "heisenberg_v");
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(dim, dim);
    const double S = static_cast<double>(ops.S);
    for (int k = 0; k + 1 < dim; ++k) {
        const double v = ops.sx_offdiag[k] / S;
        const double ph = (u0.phases[k] - u0.phases[k + 1]) * static_cast<double>(t);
        M(k, k + 1) = v * std::exp(cplx(0.0, ph));
        M(k + 1, k) = std::conj(M(k, k + 1));
    }
    return M;
}

// Sigma_t = tau * sum_{t'=0..t-1} V_t'
inline Eigen::MatrixXcd sigma_exact(const AngularMomentumOps& ops,
                                    const UnperturbedPropagator& u0, long t,
                                    bool allow_large = false) {
    const int dim = ops.dim();
    detail::check_dense_gate(dim, allow_large, "sigma_exact");
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(dim, dim);
    for (long tp = 0; tp < t; ++tp) acc += heisenberg_v(ops, u0, tp, allow_large);
    return acc; // tau = 1
}

// Gamma_t = (i tau^2 / hbar) sum_{t' <= t''} [V_t', V_t''] (the diagonal pairs
// commute, so the sum is effectively over t' < t''). Accumulated incrementally:
// after processing time t'', G holds sum_{t'<t''} [V_t', V_t''].
inline Eigen::MatrixXcd gamma_exact(const SpinParameters& sp, const AngularMomentumOps& ops,
                                    const UnperturbedPropagator& u0, long t,
                                    bool allow_large = false) {
    const int dim = ops.dim();
    detail::check_dense_gate(dim, allow_large, "gamma_exact");
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd running = Eigen::MatrixXcd::Zero(dim, dim); // sum of V_t' so far
    for (long tc = 0; tc < t; ++tc) {
        const Eigen::MatrixXcd cur = heisenberg_v(ops, u0, tc, allow_large);
        G += running * cur - cur * running;
        running += cur;
    }
    return cplx(0.0, 1.0) * (sp.tau * sp.tau / sp.hbar) * G;
}

// Diagonal of the doubly-averaged perturbation,
//   Vbb_nn = (tau/hbar) sum_{k != n} |V_nk|^2 cot[(phi_n - phi_k)/2].
// The sign of the argument is fixed by the Heisenberg phase ordering used in
// heisenberg_v above; it reproduces lim Gamma_t/(t tau) from the brute-force
// commutator sum (the unit tests check exactly this pairing).
inline Eigen::VectorXd v_doubly_averaged_exact(const SpinParameters& sp,
                                               const AngularMomentumOps& ops,
                                               const UnperturbedPropagator& u0) {
    const int dim = ops.dim();
    Eigen::VectorXd out(dim);
    const double S = static_cast<double>(ops.S);
    const double twopi = 2.0 * M_PI;
    for (int n = 0; n < dim; ++n) {
        double acc = 0.0;
        for (int k : {n - 1, n + 1}) {
            if (k < 0 || k >= dim) continue;
            double gap = std::fmod(u0.phases[n] - u0.phases[k], twopi);
            if (gap > M_PI) gap -= twopi;
            if (gap < -M_PI) gap += twopi;
            if (std::abs(gap) < 1e-9)
                throw DegenerateSpectrum(
                    "v_doubly_averaged_exact: eigenphases of m=" + std::to_string(n - ops.S) +
                    " and m=" + std::to_string(k - ops.S) + " are degenerate to <1e-9;"
                    " the cot sum is ill-defined for this spectrum");
            const double v = ops.sx_offdiag[std::min(n, k)] / S;
            acc += v * v / std::tan(0.5 * gap);
        }
        out[n] = sp.tau / sp.hbar * acc;
    }
    return out;
}

// Oracle bundle for one (model, t): everything the freeze analysis is built on.
struct EchoOperators {
    Eigen::MatrixXcd sigma_t;
    Eigen::VectorXd v_bar;  // diagonal of V in the U0 eigenbasis; identically 0 here
    Eigen::VectorXd v_bbar; // doubly-averaged diagonal
    Eigen::MatrixXcd gamma_t;
};

inline EchoOperators echo_operators(const SpinParameters& sp, const AngularMomentumOps& ops,
                                    const UnperturbedPropagator& u0, long t,
                                    bool allow_large = false) {
    EchoOperators e;
    e.sigma_t = sigma_exact(ops, u0, t, allow_large);
    e.v_bar = Eigen::VectorXd::Zero(ops.dim()); // V = Sx/S has no diagonal part
    e.v_bbar = v_doubly_averaged_exact(sp, ops, u0);
    e.gamma_t = gamma_exact(sp, ops, u0, t, allow_large);
    return e;
}

// ---------------------------------------------------------------------------
// State-side helpers (O(dim) per time step, no dense matrices)
// ---------------------------------------------------------------------------

// w = V_t |psi> built as U0^-t V U0^t |psi> through elementwise phases.
inline Eigen::VectorXcd apply_heisenberg_v(const AngularMomentumOps& ops,
                                           const UnperturbedPropagator& u0, long t,
                                           const Eigen::VectorXcd& psi) {
    const int dim = ops.dim();
    Eigen::VectorXcd fwd(dim), out(dim);
    for (int k = 0; k < dim; ++k)
        fwd[k] = std::exp(cplx(0.0, -u0.phases[k] * static_cast<double>(t))) * psi[k];
    ops.apply_v(fwd, out);
    for (int k = 0; k < dim; ++k)
        out[k] *= std::exp(cplx(0.0, u0.phases[k] * static_cast<double>(t)));
    return out;
}

// Sigma_t |psi> accumulated step by step; also returns <Sigma_t> and <Sigma_t^2>
// through the caller reading the vector.
inline Eigen::VectorXcd sigma_apply(const SpinParameters& sp, const AngularMomentumOps& ops,
                                    const UnperturbedPropagator& u0, long t,
                                    const Eigen::VectorXcd& psi) {
    const int dim = ops.dim();
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(dim);
    Eigen::VectorXcd ph = Eigen::VectorXcd::Ones(dim); // exp(-i phi t') factors
    Eigen::VectorXcd fwd(dim), v(dim);
    for (long tp = 0; tp < t; ++tp) {
        fwd = ph.cwiseProduct(psi);
        ops.apply_v(fwd, v);
        acc += v.cwiseProduct(ph.conjugate()); // unit phases: 1/ph = conj(ph)
        ph.array() *= u0.step_factor.array();
    }
    return sp.tau * acc;
}

// Two-time correlation C(t',t'') = <V_t' V_t''> - <V_t'><V_t''> in |psi>.
inline cplx correlation_function(const AngularMomentumOps& ops, const UnperturbedPropagator& u0,
                                 const Eigen::VectorXcd& psi, long t1, long t2) {
    const Eigen::VectorXcd w1 = apply_heisenberg_v(ops, u0, t1, psi);
    const Eigen::VectorXcd w2 = apply_heisenberg_v(ops, u0, t2, psi);
    const cplx e1 = psi.dot(w1);
    const cplx e2 = psi.dot(w2);
    return w1.dot(w2) - std::conj(e1) * e2;
}

// Full grid C(t',t'') for t',t'' in [0, t_max]; hermitian by construction.
inline Eigen::MatrixXcd correlation_grid(const AngularMomentumOps& ops,
                                         const UnperturbedPropagator& u0,
                                         const Eigen::VectorXcd& psi, long t_max) {
    if (t_max < 0 || t_max > 4096)
        throw std::invalid_argument("correlation_grid: t_max out of the supported range");
    const int n = static_cast<int>(t_max) + 1;
    const int dim = ops.dim();
    Eigen::MatrixXcd W(dim, n);
    Eigen::VectorXcd e(n);
    Eigen::VectorXcd ph = Eigen::VectorXcd::Ones(dim);
    Eigen::VectorXcd fwd(dim), v(dim);
    for (int t = 0; t < n; ++t) {
        fwd = ph.cwiseProduct(psi);
        ops.apply_v(fwd, v);
        W.col(t) = v.cwiseProduct(ph.conjugate());
        e[t] = psi.dot(W.col(t));
        ph.array() *= u0.step_factor.array();
    }
    Eigen::MatrixXcd C = W.adjoint() * W;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) C(a, b) -= std::conj(e[a]) * e[b];
    return C;
}

// Residual of the lowest-order response formula at fixed t:
//   residual(delta) = F_exact(t; delta) - [1 - (delta/hbar)^2 Var_psi(Sigma_t)]
// The delta^2 term uses the exact Sigma_t in the given state, so the residual
// isolates everything beyond second order.
inline std::vector<double> linear_response_residual(const SpinParameters& sp,
                                                    const AngularMomentumOps& ops,
                                                    const UnperturbedPropagator& u0,
                                                    const KickPropagator& kick_template,
                                                    const Eigen::VectorXcd& psi, long t,
                                                    const std::vector<double>& deltas) {
    detail::check_state(psi, ops.dim());
    const Eigen::VectorXcd spsi = sigma_apply(sp, ops, u0, t, psi);
    const double mom1 = std::real(psi.dot(spsi));
    const double mom2 = std::real(spsi.dot(spsi));
    const double var = mom2 - mom1 * mom1;

    std::vector<double> out;
    out.reserve(deltas.size());
    for (double d : deltas) {
        const KickPropagator kick(kick_template, d);
        const FidelityTrace tr = run_fidelity(psi, u0, kick, t, std::max<long>(t, 1));
        const double fex = tr.fidelity[tr.fidelity.size() - 1];
        const double flr = 1.0 - (d / sp.hbar) * (d / sp.hbar) * var;
        out.push_back(fex - flr);
    }
    return out;
}

} // namespace echotop
