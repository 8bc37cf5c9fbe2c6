#pragma once
// Semiclassical theory of the fidelity freeze for the integrable twist map
//   omega(j) = alpha (j - beta) + (gamma/2)(j - j_ref)^2,
// perturbed by the residual observable v(j,theta) = sqrt(1-j^2) cos(theta).
//
// Everything is built from the two Fourier modes v_{+-1} = sqrt(1-j^2)/2:
// time-integrating them gives tilde_v, the plateau height; commuting them
// gives the doubly-averaged drift bbar_v, the late Gaussian/power-law decay.
//
// Sign conventions follow the Heisenberg ordering used in echo.hpp; the
// closed forms below are pinned against the exact lattice operators in the
// test suite, so a sign slip anywhere shows up immediately.

#include "echo.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

namespace echotop {

struct SingularFrequency : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonresonanceViolated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntegrableModel {
    SpinParameters spin;
    TopParameters top;
};

inline double omega_of(const TopParameters& top, double j) {
    const double dc = j - top.j_ref;
    return top.alpha * (j - top.beta) + 0.5 * top.gamma * dc * dc;
}

inline double omega_prime(const TopParameters& top, double j) {
    return top.alpha + top.gamma * (j - top.j_ref);
}

inline double omega_second(const TopParameters& top) { return top.gamma; }

// ---------------------------------------------------------------------------
// Time-integrated perturbation on a torus
// ---------------------------------------------------------------------------

// tilde v_m = tau v_m / (1 - e^{i m omega}), the geometric sum of one Fourier
// mode along the orbit. Only m = +-1 exist for this perturbation.
inline cplx tilde_v_mode(const TopParameters& top, double j, int m, double tau = 1.0) {
    if (m == 0) return 0.0; // residual perturbation: no zero mode
    const double w = omega_of(top, j);
    const cplx den = 1.0 - std::exp(cplx(0.0, m * w));
    if (std::abs(den) < 1e-8)
        throw SingularFrequency("tilde_v_mode: 1 - exp(i m omega) vanishes at j=" +
                                std::to_string(j) + ", m=" + std::to_string(m) +
                                " (torus frequency resonant)");
    const cplx vm = (std::abs(m) == 1) ? cplx(0.5 * std::sqrt(std::max(0.0, 1.0 - j * j)), 0.0)
                                       : cplx(0.0, 0.0);
    return tau * vm / den;
}

// Real-space form: tilde_v(j,theta) = -(1/2) sqrt(1-j^2) sin(theta - omega/2)
//                                      / sin(omega/2).
// Chosen so that summing v along the orbit telescopes,
//   sum_{t'=0}^{T-1} v(theta + omega t') = tilde_v(theta) - tilde_v(theta + omega T).
inline double tilde_v(const TopParameters& top, double j, double theta) {
    const double w = omega_of(top, j);
    const double s = std::sin(0.5 * w);
    if (std::abs(s) < 1e-12)
        throw SingularFrequency("tilde_v: sin(omega/2) vanishes at j=" + std::to_string(j));
    return -0.5 * std::sqrt(std::max(0.0, 1.0 - j * j)) * std::sin(theta - 0.5 * w) / s;
}

// ---------------------------------------------------------------------------
// Doubly-averaged drift and its derivative
// ---------------------------------------------------------------------------

// bbar_v(j) = (j/2) cot(omega/2) + (omega'/8)(1-j^2) csc^2(omega/2)
//           = -(1/4) d/dj [ (1-j^2) cot(omega/2) ]
inline double bbar_v(const TopParameters& top, double j) {
    const double w = omega_of(top, j);
    const double s = std::sin(0.5 * w);
    if (std::abs(s) < 1e-12)
        throw SingularFrequency("bbar_v: sin(omega/2) vanishes at j=" + std::to_string(j));
    const double c = std::cos(0.5 * w) / s;
    const double q = 1.0 / (s * s);
    return 0.5 * j * c + 0.125 * omega_prime(top, j) * (1.0 - j * j) * q;
}

// u(j) = d bbar_v / dj, closed form.
inline double bbar_v_prime(const TopParameters& top, double j) {
    const double w = omega_of(top, j);
    const double s = std::sin(0.5 * w);
    if (std::abs(s) < 1e-12)
        throw SingularFrequency("bbar_v_prime: sin(omega/2) vanishes at j=" + std::to_string(j));
    const double c = std::cos(0.5 * w) / s;
    const double q = 1.0 / (s * s);
    const double wp = omega_prime(top, j);
    const double wpp = omega_second(top);
    return 0.5 * c - 0.5 * j * wp * q + 0.125 * wpp * (1.0 - j * j) * q -
           0.125 * wp * wp * (1.0 - j * j) * c * q;
}

// Finite-difference fallback (Richardson-extrapolated central differences);
// used to validate the closed form and wherever gamma makes hand algebra shaky.
inline double bbar_v_prime_fd(const TopParameters& top, double j, double h = 1e-5) {
    const double d1 = (bbar_v(top, j + h) - bbar_v(top, j - h)) / (2.0 * h);
    const double d2 = (bbar_v(top, j + 0.5 * h) - bbar_v(top, j - 0.5 * h)) / h;
    return (4.0 * d2 - d1) / 3.0;
}

// nu(j) = sum_{m != 0} |tilde_v_m|^2 = (1-j^2) / (8 sin^2(omega/2))
inline double nu_coherent(const TopParameters& top, double j) {
    const double w = omega_of(top, j);
    const double s = std::sin(0.5 * w);
    if (std::abs(s) < 1e-12)
        throw SingularFrequency("nu_coherent: sin(omega/2) vanishes at j=" + std::to_string(j));
    return (1.0 - j * j) / (8.0 * s * s);
}

// ---------------------------------------------------------------------------
// Plateau formulas
// ---------------------------------------------------------------------------

// The plateau argument delta*S * |amplitude of tilde_v|:
//   arg(j) = (delta/hbar) sqrt(1-j^2) / (2 |sin(omega/2)|)
inline double plateau_argument(const TopParameters& top, double j, double delta_over_hbar) {
    const double w = omega_of(top, j);
    const double s = std::abs(std::sin(0.5 * w));
    if (s == 0.0) return std::numeric_limits<double>::infinity();
    return delta_over_hbar * std::sqrt(std::max(0.0, 1.0 - j * j)) / (2.0 * s);
}

inline double bessel_j0(double x) {
    if (!std::isfinite(x) || std::abs(x) > 1e8) return 0.0; // envelope ~ x^-1/2 is dead anyway
    return std::cyl_bessel_j(0.0, std::abs(x));
}

// Coherent-packet plateau F_plat = J0(arg)^2 evaluated at the packet action.
inline double plateau_coherent(const TopParameters& top, double j_star,
                               double delta_over_hbar) {
    const double a = plateau_argument(top, j_star, delta_over_hbar);
    const double b = bessel_j0(a);
    return b * b;
}

// Same quantity from first principles: the angle average of the tilde_v phase,
//   |<exp(-i (delta/hbar) tilde_v(j, theta))>_theta|^2.
// Periodic trapezoid, spectrally accurate; agrees with the Bessel form to 1e-10.
inline double plateau_coherent_general(const TopParameters& top, double j_star,
                                       double delta_over_hbar, int n_theta = 8192) {
    cplx acc(0.0, 0.0);
    for (int i = 0; i < n_theta; ++i) {
        const double th = 2.0 * M_PI * i / n_theta;
        acc += std::exp(cplx(0.0, -delta_over_hbar * tilde_v(top, j_star, th)));
    }
    acc /= static_cast<double>(n_theta);
    return std::norm(acc);
}

// Is some torus resonant (sin(omega/2) = 0) inside j in [-1,1]? omega is
// quadratic in j, so the exact range check is cheap.
inline bool torus_resonance_inside(const TopParameters& top) {
    double lo = std::min(omega_of(top, -1.0), omega_of(top, 1.0));
    double hi = std::max(omega_of(top, -1.0), omega_of(top, 1.0));
    if (top.gamma != 0.0) {
        const double jv = top.j_ref - top.alpha / top.gamma; // omega'(jv) = 0
        if (jv > -1.0 && jv < 1.0) {
            lo = std::min(lo, omega_of(top, jv));
            hi = std::max(hi, omega_of(top, jv));
        }
    }
    const double twopi = 2.0 * M_PI;
    return std::ceil(lo / twopi - 1e-12) <= std::floor(hi / twopi + 1e-12);
}

// nu averaged over the full action space, (1/V) int dj nu(j) with V = 2.
inline double nu_random(const TopParameters& top, int n = 8192) {
    if (torus_resonance_inside(top))
        throw NonresonanceViolated("nu_random: a resonant torus lies inside |j|<1; "
                                   "the nu integral diverges (use the singular lattice form)");
    double acc = 0.0; // composite Simpson
    for (int i = 0; i <= n; ++i) {
        const double j = -1.0 + 2.0 * i / n;
        const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += wgt * nu_coherent(top, j);
    }
    return acc * (2.0 / n) / 3.0 / 2.0;
}

// Random-state plateau [ (1/V) int dj J0(arg(j))^2 ]^2 for a nonresonant top.
inline double plateau_random(const TopParameters& top, double delta_over_hbar, int n = 8192) {
    if (torus_resonance_inside(top))
        throw NonresonanceViolated("plateau_random: resonant torus inside |j|<1; "
                                   "use plateau_random_singular");
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double j = -1.0 + 2.0 * i / n;
        const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double b = bessel_j0(plateau_argument(top, j, delta_over_hbar));
        acc += wgt * b * b;
    }
    acc = acc * (2.0 / n) / 3.0 / 2.0;
    return acc * acc;
}

// Resonant variant: the action integral is replaced by a sum over the actual
// spin lattice j_m = m/S. Exactly resonant sites never freeze, so they add
// nothing to the time-averaged amplitude (J0 of an infinite argument is 0
// here), but they keep their share of the normalization: a random state
// populates every level all the same.
inline double plateau_random_singular(const SpinParameters& sp, const TopParameters& top,
                                      double delta_over_hbar) {
    double acc = 0.0;
    for (int k = 0; k < sp.dim; ++k) {
        const double j = static_cast<double>(k - sp.S) / sp.S;
        const double b = bessel_j0(plateau_argument(top, j, delta_over_hbar));
        acc += b * b;
    }
    const double mean = acc / sp.dim;
    return mean * mean;
}

// ---------------------------------------------------------------------------
// Packet geometry and time scales
// ---------------------------------------------------------------------------

// Gaussian packet at (theta*, phi*) has action variance hbar/(2 Lambda) with
// Lambda = 1/(1 - j*^2); delta_j is the packet half-width in action.
struct PacketGeometry {
    double j_star;
    double lambda;
    double delta_j;
};

inline PacketGeometry packet_geometry(const SpinParameters& sp, double theta_star) {
    PacketGeometry g;
    g.j_star = std::cos(theta_star);
    g.lambda = 1.0 / std::max(1e-300, 1.0 - g.j_star * g.j_star);
    g.delta_j = std::sqrt(sp.hbar / (2.0 * g.lambda));
    return g;
}

enum class StateKind { Coherent, Random };

struct Timescales {
    std::optional<double> t1; // plateau onset; absent when omega'(j*) = 0
    double t2 = 0;            // plateau end
    double t_coh = 0;         // Gaussian decay scale; NaN for random states
    double t_r = 0;           // echo resonance period 2 pi/(hbar omega')
    double t_ran = 0;         // hbar/delta^2, onset of the random power law
    double t_star = 0;        // action-space-integral validity limit
};

// Effective |dbbar_v/dj| entering t2(random) and t*: the value at the packet
// for coherent states, a median over the action space for random states
// (a plain mean diverges whenever bbar_v crosses zero, so the median is the
// honest "effective" number).
inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline Timescales timescales(const SpinParameters& sp, const TopParameters& top, double delta,
                             double j_star, StateKind kind) {
    Timescales ts;
    const double hbar = sp.hbar;
    const double tau = sp.tau;
    const PacketGeometry g = packet_geometry(sp, std::acos(std::clamp(j_star, -1.0, 1.0)));
    const double wp = omega_prime(top, j_star);

    if (std::abs(wp) < 1e-12) {
        ts.t1.reset(); // shearless packet: no t1 scale
    } else {
        // fastest harmonic |m|=1 dominates the dephasing of tilde_v
        ts.t1 = 2.0 / (std::abs(wp) * std::sqrt(hbar / g.lambda));
    }
    ts.t_r = 2.0 * M_PI / (hbar * std::abs(wp) > 0 ? hbar * std::abs(wp) : 1e-300);
    ts.t_ran = hbar / (delta * delta);

    if (kind == StateKind::Coherent) {
        const double u = bbar_v_prime(top, j_star);
        const double nu = nu_coherent(top, j_star);
        ts.t_coh =
            std::sqrt(g.lambda) / std::abs(u) * std::sqrt(8.0 * hbar) / (delta * delta);
        ts.t2 = std::min(1.0, (delta / hbar) * std::sqrt(nu)) * ts.t_coh;
        ts.t_star = 1.0 / (std::abs(u) * tau * delta * delta);
    } else {
        // effective values over a uniform j grid, resonant tori skipped;
        // no Gaussian scale exists for a delocalized state
        ts.t_coh = std::numeric_limits<double>::quiet_NaN();
        std::vector<double> ratio, du;
        const int n = 4096;
        for (int i = 1; i < n; ++i) {
            const double j = -1.0 + 2.0 * i / n;
            const double s = std::abs(std::sin(0.5 * omega_of(top, j)));
            if (s < 1e-6) continue;
            ratio.push_back(std::sqrt(nu_coherent(top, j)) / std::abs(bbar_v(top, j)));
            du.push_back(std::abs(bbar_v_prime(top, j)));
        }
        ts.t2 = median_of(ratio) * 2.0 / (tau * delta);
        ts.t_star = 1.0 / (median_of(du) * tau * delta * delta);
    }
    return ts;
}

// ---------------------------------------------------------------------------
// Coherent-packet decay and echo resonances
// ---------------------------------------------------------------------------

// Optional empirical correction: scale the plateau prefactor and the exponent
// when the plateau is far below one and the pure Gaussian is only the envelope.
struct GaussianCorrection {
    double plateau_factor = 1.0;
    double exponent_factor = 1.0;
};

// f(t) = sqrt(p) exp[ -c (u^2/Lambda) delta^4 t^2 / (16 hbar)
//                     + i bbar_v(j*) delta^2 tau t / (2 hbar) ]
inline std::vector<cplx> gaussian_decay_coherent(const SpinParameters& sp,
                                                 const TopParameters& top, double j_star,
                                                 double delta, const std::vector<double>& times,
                                                 GaussianCorrection corr = {}) {
    const PacketGeometry g = packet_geometry(sp, std::acos(std::clamp(j_star, -1.0, 1.0)));
    const double u = bbar_v_prime(top, j_star);
    const double vb = bbar_v(top, j_star);
    const double d2 = delta * delta;
    const double decay = corr.exponent_factor * (u * u / g.lambda) * d2 * d2 / (16.0 * sp.hbar);
    const double rot = vb * d2 * sp.tau / (2.0 * sp.hbar);
    std::vector<cplx> f;
    f.reserve(times.size());
    for (double t : times)
        f.push_back(std::sqrt(corr.plateau_factor) *
                    std::exp(cplx(-decay * t * t, rot * t)));
    return f;
}

struct Resonance {
    long k = 0;       // numerator of the t_r multiple
    long p = 1;       // denominator (1: full 2pi recurrences, 2: pi recurrences, ...)
    double time = 0;  // (k/p) t_r
    double zeta = 0;  // hbar m omega'' t / (2 Lambda) at that time, m = 1
    double delta_t = 0; // temporal half-width sqrt(1+zeta^2)/(m omega' Delta_j)
};

inline double resonance_zeta(const SpinParameters& sp, const TopParameters& top, double j_star,
                             double t, int m = 1) {
    const PacketGeometry g = packet_geometry(sp, std::acos(std::clamp(j_star, -1.0, 1.0)));
    return sp.hbar * m * omega_second(top) * t / (2.0 * g.lambda);
}

inline double resonance_width(const SpinParameters& sp, const TopParameters& top, double j_star,
                              double t, int m = 1) {
    const PacketGeometry g = packet_geometry(sp, std::acos(std::clamp(j_star, -1.0, 1.0)));
    const double z = resonance_zeta(sp, top, j_star, t, m);
    return std::sqrt(1.0 + z * z) / (m * std::abs(omega_prime(top, j_star)) * g.delta_j);
}

// All fidelity recurrences (k/p) t_r up to t_max, for denominators p <= p_max.
// p=1 are the full recurrences, p=2 the pi recurrences that recover F only
// through the even harmonics (for this perturbation: completely, since the
// Sigma spectrum is odd-only).
inline std::vector<Resonance> resonance_predictor(const SpinParameters& sp,
                                                  const TopParameters& top, double j_star,
                                                  double t_max, long p_max = 2) {
    std::vector<Resonance> out;
    const double wp = omega_prime(top, j_star);
    if (std::abs(wp) < 1e-12) return out;
    const double tr = 2.0 * M_PI / (sp.hbar * std::abs(wp));
    for (long p = 1; p <= p_max; ++p) {
        for (long k = 1;; ++k) {
            if (std::gcd(k, p) != 1) continue;
            const double t = (static_cast<double>(k) / p) * tr;
            if (t > t_max) break;
            Resonance r;
            r.k = k;
            r.p = p;
            r.time = t;
            r.zeta = resonance_zeta(sp, top, j_star, t);
            r.delta_t = resonance_width(sp, top, j_star, t);
            out.push_back(r);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const Resonance& a, const Resonance& b) { return a.time < b.time; });
    return out;
}

// Shape of one echo resonance: the normalized amplitude envelope around the
// k-th full recurrence as a function of the offset t' from the peak.
//   env(t') = exp[i m (omega* t - chi)] (1 - i zeta)^{-1/2}
//             exp[ -(hbar m^2 omega'^2 t'^2 / (4 Lambda)) (1 + i zeta)/(1+zeta^2) ]
// |env|^2 peaks at (1+zeta^2)^{-1/2} and has 1/e half-width resonance_width().
struct ResonanceProfile {
    std::vector<cplx> envelope;
    double peak_suppression = 1.0; // (1+zeta^2)^{-1/2}, the gamma-detuning penalty
    double width = 0.0;
    double zeta = 0.0;
};

inline ResonanceProfile resonance_profile(const SpinParameters& sp, const TopParameters& top,
                                          double j_star, long k, int m,
                                          const std::vector<double>& offsets) {
    ResonanceProfile prof;
    const PacketGeometry g = packet_geometry(sp, std::acos(std::clamp(j_star, -1.0, 1.0)));
    const double wp = omega_prime(top, j_star);
    const double tr = 2.0 * M_PI / (sp.hbar * std::abs(wp));
    const double t0 = k * tr;
    const double z = resonance_zeta(sp, top, j_star, t0, m);
    prof.zeta = z;
    prof.peak_suppression = 1.0 / std::sqrt(1.0 + z * z);
    prof.width = resonance_width(sp, top, j_star, t0, m);
    const double chi = 2.0 * M_PI * k * g.j_star / sp.hbar;
    const cplx root = std::pow(cplx(1.0, -z), -0.5);
    const double w0 = omega_of(top, j_star);
    prof.envelope.reserve(offsets.size());
    for (double tp : offsets) {
        const double gauss = sp.hbar * m * m * wp * wp * tp * tp / (4.0 * g.lambda);
        const cplx ex(-gauss / (1.0 + z * z), -gauss * z / (1.0 + z * z));
        const cplx carrier = std::exp(cplx(0.0, m * (w0 * (t0 + tp) - chi)));
        prof.envelope.push_back(carrier * root * std::exp(ex));
    }
    return prof;
}

// ---------------------------------------------------------------------------
// Asymptotic decay of random states
// ---------------------------------------------------------------------------

struct StationaryPoint {
    double j = 0;
    double vbb = 0;    // bbar_v at the point
    double curv = 0;   // d^2 bbar_v / dj^2
};

// Roots of u(j) = dbbar_v/dj inside (-1,1): coarse grid scan + bisection.
// Sign changes across a resonant torus are poles of u, not roots; they are
// rejected by the residual-size check after the bisection.
inline std::vector<StationaryPoint> stationary_points(const TopParameters& top,
                                                      int grid_n = 2048) {
    std::vector<StationaryPoint> out;
    const double eps = 1e-9;
    auto safe_u = [&](double j) -> double {
        try {
            return bbar_v_prime(top, j);
        } catch (const SingularFrequency&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    double prev_j = -1.0 + eps;
    double prev_u = safe_u(prev_j);
    for (int i = 1; i <= grid_n; ++i) {
        const double j = -1.0 + eps + (2.0 - 2.0 * eps) * i / grid_n;
        const double uj = safe_u(j);
        if (std::isfinite(prev_u) && std::isfinite(uj) && ((prev_u < 0) != (uj < 0))) {
            double a = prev_j, b = j, ua = prev_u;
            for (int it = 0; it < 80 && (b - a) > 1e-12; ++it) {
                const double mid = 0.5 * (a + b);
                const double um = safe_u(mid);
                if (!std::isfinite(um)) break;
                if ((um < 0) == (ua < 0)) {
                    a = mid;
                    ua = um;
                } else {
                    b = mid;
                }
            }
            const double jr = 0.5 * (a + b);
            const double ur = safe_u(jr);
            if (std::isfinite(ur) && std::abs(ur) < 1e-4) {
                StationaryPoint p;
                p.j = jr;
                p.vbb = bbar_v(top, jr);
                const double h = 1e-6;
                p.curv = (safe_u(jr + h) - safe_u(jr - h)) / (2.0 * h);
                out.push_back(p);
            }
        }
        prev_j = j;
        prev_u = uj;
    }
    return out;
}

// Evaluator A, literal action-space integral with flat weight:
//   A(kappa) = (1/V) int dj exp(i kappa bbar_v(j)),  V = 2.
inline cplx asymptotic_random_continuum(const TopParameters& top, double kappa, int n = 65536) {
    cplx acc(0.0, 0.0);
    for (int i = 0; i <= n; ++i) {
        const double j = -1.0 + 2.0 * i / n;
        const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        double vb;
        try {
            vb = bbar_v(top, j);
        } catch (const SingularFrequency&) {
            continue;
        }
        acc += wgt * std::exp(cplx(0.0, kappa * vb));
    }
    return acc * (2.0 / n) / 3.0 / 2.0;
}

// Evaluator A on the spin lattice with the J0 plateau prefactor and the exact
// doubly-averaged diagonal; this is the curve that overlays measured ensemble
// decays. F_theory(t) = | (1/N) sum_n J0(arg_n) exp(i vbb_n delta^2 t/(2 hbar)) |^2
inline Eigen::VectorXd asymptotic_random_lattice(const SpinParameters& sp,
                                                 const AngularMomentumOps& ops,
                                                 const UnperturbedPropagator& u0,
                                                 const TopParameters& top, double delta,
                                                 const std::vector<long>& times) {
    const Eigen::VectorXd vbb = v_doubly_averaged_exact(sp, ops, u0);
    const double dS = delta / sp.hbar;
    Eigen::VectorXd w(sp.dim);
    for (int k = 0; k < sp.dim; ++k) {
        const double j = static_cast<double>(k - sp.S) / sp.S;
        w[k] = bessel_j0(plateau_argument(top, j, dS));
    }
    const double c = delta * delta / (2.0 * sp.hbar);
    Eigen::VectorXd F(times.size());
    for (size_t i = 0; i < times.size(); ++i) {
        cplx acc(0.0, 0.0);
        for (int k = 0; k < sp.dim; ++k)
            acc += w[k] * std::exp(cplx(0.0, c * vbb[k] * static_cast<double>(times[i])));
        F[static_cast<Eigen::Index>(i)] = std::norm(acc / static_cast<double>(sp.dim));
    }
    return F;
}

// Evaluator B, stationary phase over the interior critical points of bbar_v:
//   f(kappa) = sum_eta (1/V) sqrt(2 pi/(kappa |vbb''|)) exp[i(kappa vbb_eta + nu_eta)]
// with nu_eta = +-pi/4 by the sign of the curvature. When no interior point
// exists the integral is boundary-dominated and B has nothing to sum.
struct AsymptoticRandom {
    bool available = false;
    std::string report;
    cplx amplitude{0.0, 0.0};
    std::vector<StationaryPoint> points;
};

inline AsymptoticRandom asymptotic_random_stationary(const TopParameters& top, double kappa) {
    AsymptoticRandom res;
    res.points = stationary_points(top);
    if (res.points.empty()) {
        res.available = false;
        res.report = "boundary-dominated regime: bbar_v has no interior stationary point; "
                     "the asymptotic integral is controlled by the j = +-1 endpoints and "
                     "the lattice evaluator should be used instead";
        return res;
    }
    res.available = true;
    cplx acc(0.0, 0.0);
    for (const StationaryPoint& p : res.points) {
        const double nu = (p.curv > 0 ? 1.0 : -1.0) * M_PI / 4.0;
        acc += 0.5 * std::sqrt(2.0 * M_PI / (kappa * std::abs(p.curv))) *
               std::exp(cplx(0.0, kappa * p.vbb + nu));
    }
    res.amplitude = acc;
    res.report = "stationary-phase sum over " + std::to_string(res.points.size()) + " point(s)";
    return res;
}

// ---------------------------------------------------------------------------
// Bundle for serialization
// ---------------------------------------------------------------------------

struct TheoryBundle {
    double j_star = 0;
    double omega = 0;
    double omega_prime = 0;
    double lambda = 0;
    double delta_j = 0;
    double u = 0;
    double vbb = 0;
    double nu = 0;
    double plateau = 0;
    Timescales times;
    std::vector<Resonance> resonances;
};

inline TheoryBundle make_theory_bundle(const SpinParameters& sp, const TopParameters& top,
                                       double delta, double theta_star, StateKind kind,
                                       double t_max_for_resonances = 0.0) {
    TheoryBundle b;
    const PacketGeometry g = packet_geometry(sp, theta_star);
    b.j_star = g.j_star;
    b.omega = omega_of(top, g.j_star);
    b.omega_prime = echotop::omega_prime(top, g.j_star);
    b.lambda = g.lambda;
    b.delta_j = g.delta_j;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double dS = delta / sp.hbar;
    if (kind == StateKind::Coherent) {
        // packet-local quantities; a packet sitting on a resonant torus is a
        // configuration error and the SingularFrequency throw is deliberate
        b.u = bbar_v_prime(top, g.j_star);
        b.vbb = bbar_v(top, g.j_star);
        b.nu = nu_coherent(top, g.j_star);
        b.plateau = plateau_coherent(top, g.j_star, dS);
    } else {
        b.u = nan;
        b.vbb = nan;
        const bool resonant = torus_resonance_inside(top);
        b.nu = resonant ? nan : nu_random(top);
        b.plateau =
            resonant ? plateau_random_singular(sp, top, dS) : plateau_random(top, dS);
    }
    b.times = timescales(sp, top, delta, g.j_star, kind);
    if (t_max_for_resonances > 0)
        b.resonances = resonance_predictor(sp, top, g.j_star, t_max_for_resonances);
    return b;
}

} // namespace echotop
