#pragma once
// Classical limit of the kicked top: the area-preserving twist map on the
// unit sphere, the impulsive x-rotation, Gaussian phase-space ensembles and
// the Monte-Carlo classical fidelity.
//
// The classical fidelity is estimated along echo trajectories,
//   F_cl(t) = E[rho0(Phi_delta^{-t} Phi_0^{t} y)] / E[rho0(y)],  y ~ rho0,
// which needs one ensemble and no phase-space binning: the map preserves
// area, so the overlap of the two evolved densities collapses to a single
// expectation value over the initial packet.

#include "states.hpp"

#include <utility>
#include <vector>

namespace echotop {

struct PoleDegenerate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SpherePoint {
    double x = 0, y = 0, z = 1;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }

    void renormalize() {
        const double n = norm();
        x /= n;
        y /= n;
        z /= n;
    }
};

// Rotation about z by the action-dependent angle alpha (z - beta); z is the
// conserved action of the unperturbed top.
inline SpherePoint twist_step(const SpherePoint& p, double alpha, double beta) {
    const double ang = alpha * (p.z - beta);
    const double c = std::cos(ang), s = std::sin(ang);
    return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

inline SpherePoint untwist_step(const SpherePoint& p, double alpha, double beta) {
    return twist_step(p, -alpha, beta);
}

// Exact rotation about the x-axis by delta (the classical limit of the
// impulsive transverse pulse).
inline SpherePoint kick_step(const SpherePoint& p, double delta) {
    const double c = std::cos(delta), s = std::sin(delta);
    return {p.x, c * p.y - s * p.z, s * p.y + c * p.z};
}

// Canonical chart (j, theta): j = z, theta = atan2(y, x) in [0, 2 pi).
inline std::pair<double, double> action_angle(const SpherePoint& p) {
    if (p.x * p.x + p.y * p.y < 1e-24)
        throw PoleDegenerate("action_angle: point at a pole, theta undefined");
    double th = std::atan2(p.y, p.x);
    if (th < 0) th += 2.0 * M_PI;
    return {p.z, th};
}

inline SpherePoint from_action_angle(double j, double theta) {
    const double r = std::sqrt(std::max(0.0, 1.0 - j * j));
    return {r * std::cos(theta), r * std::sin(theta), j};
}

// rho_cl(theta, phi) = ((4S+1)/(4 pi)) exp{-S[(theta-theta*)^2
//                                            + (phi-phi*)^2 sin^2 theta]}
// The phi difference is wrapped to (-pi, pi] so packets sit anywhere.
inline double coherent_density(int S, double theta_star, double phi_star,
                               const SpherePoint& p) {
    const double theta = std::acos(std::clamp(p.z, -1.0, 1.0));
    double dphi = std::atan2(p.y, p.x) - phi_star;
    dphi = std::remainder(dphi, 2.0 * M_PI);
    const double dth = theta - theta_star;
    const double st = std::sin(theta);
    const double expo = -S * (dth * dth + dphi * dphi * st * st);
    return (4.0 * S + 1.0) / (4.0 * M_PI) * std::exp(expo);
}

struct ClassicalEnsemble {
    std::vector<SpherePoint> points;
    std::vector<double> weights; // rho_cl at each point (the F_cl denominator)
    double theta_star = 0;
    double phi_star = 0;
    int S = 0;
    double norm_const = 0; // (4S+1)/(4 pi)
};

// Gaussian sampling of the packet in the (theta, phi) chart with
// sigma_theta = 1/sqrt(2S) and sigma_phi = 1/(sqrt(2S) sin theta*).
// Valid while the packet width stays small against sin(theta*).
inline ClassicalEnsemble sample_coherent(int S, double theta_star, double phi_star,
                                         long count, uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_coherent: count must be >= 1");
    ClassicalEnsemble e;
    e.theta_star = theta_star;
    e.phi_star = phi_star;
    e.S = S;
    e.norm_const = (4.0 * S + 1.0) / (4.0 * M_PI);
    e.points.reserve(count);
    e.weights.reserve(count);
    Splitmix64 rng(seed);
    const double sig_t = 1.0 / std::sqrt(2.0 * S);
    const double sig_p = sig_t / std::sin(theta_star);
    for (long i = 0; i < count; ++i) {
        const double th = theta_star + sig_t * rng.normal();
        const double ph = phi_star + sig_p * rng.normal();
        SpherePoint p{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
        e.points.push_back(p);
        e.weights.push_back(coherent_density(S, theta_star, phi_star, p));
    }
    return e;
}

namespace detail {

// Advance a working copy forward under the unperturbed map (pure twist) and
// keep the norm pinned; rotations drift at O(eps) per step.
inline void advance_unperturbed(std::vector<SpherePoint>& pts, double alpha, double beta,
                                long steps, long& steps_since_renorm) {
    for (long s = 0; s < steps; ++s) {
        for (SpherePoint& p : pts) p = twist_step(p, alpha, beta);
        if (++steps_since_renorm >= 1024) {
            for (SpherePoint& p : pts) p.renormalize();
            steps_since_renorm = 0;
        }
    }
}

// Unwind t steps of the perturbed map: inverse of (twist o kick) is
// (untwist, then kick by -delta), applied t times.
inline SpherePoint unwind_perturbed(SpherePoint p, double alpha, double beta, double delta,
                                    long t) {
    for (long s = 0; s < t; ++s) {
        p = untwist_step(p, alpha, beta);
        p = kick_step(p, -delta);
        if ((s & 1023) == 1023) p.renormalize();
    }
    return p;
}

} // namespace detail

struct ClassicalTrace {
    std::vector<long> times;
    std::vector<double> fidelity;
    std::vector<double> stderr_fidelity;
};

// Echo-trajectory estimate of F_cl at each requested time (ascending).
// Uncertainty comes from the ratio-estimator variance, which is exactly zero
// at t = 0 where numerator and denominator terms coincide.
inline ClassicalTrace classical_fidelity_trace(const ClassicalEnsemble& e, double alpha,
                                               double beta, double delta,
                                               const std::vector<long>& times) {
    const size_t n = e.points.size();
    double wsum = 0;
    for (double w : e.weights) wsum += w;
    const double wmean = wsum / n;

    std::vector<SpherePoint> fw = e.points;
    long cursor = 0, since_renorm = 0;

    ClassicalTrace tr;
    for (long t : times) {
        if (t < cursor)
            throw std::invalid_argument("classical_fidelity_trace: times must be ascending");
        detail::advance_unperturbed(fw, alpha, beta, t - cursor, since_renorm);
        cursor = t;
        double num = 0, dev2 = 0;
        std::vector<double> vals(n);
        for (size_t i = 0; i < n; ++i) {
            const SpherePoint back =
                detail::unwind_perturbed(fw[i], alpha, beta, delta, t);
            vals[i] = coherent_density(e.S, e.theta_star, e.phi_star, back);
            num += vals[i];
        }
        const double F = num / wsum;
        for (size_t i = 0; i < n; ++i) {
            const double d = vals[i] - F * e.weights[i];
            dev2 += d * d;
        }
        tr.times.push_back(t);
        tr.fidelity.push_back(F);
        tr.stderr_fidelity.push_back(
            std::sqrt(dev2 / (static_cast<double>(n) * (n - 1.0))) / wmean);
    }
    return tr;
}

inline double classical_fidelity(const ClassicalEnsemble& e, double alpha, double beta,
                                 double delta, long t) {
    return classical_fidelity_trace(e, alpha, beta, delta, {t}).fidelity.front();
}

} // namespace echotop
