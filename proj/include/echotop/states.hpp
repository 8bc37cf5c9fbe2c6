#pragma once
// Initial states: SU(2) coherent packets and normalized random vectors.
//
// Coherent amplitudes are assembled in log space so that large S does not
// underflow the binomial tails; the state is normalized explicitly at the end.
// Randomness comes from a small self-contained splitmix64 stream so results
// are reproducible across platforms and independent of libstdc++ details.

#include "spin.hpp"

#include <cstdint>
#include <cmath>

namespace echotop {

// splitmix64: tiny, fast, passes BigCrush as a 64-bit mixer. One instance per
// named stream; streams never share state.
struct Splitmix64 {
    std::uint64_t state;

    explicit Splitmix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1) with 53 random bits
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller; one value per call, second one cached
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

  private:
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// Derive a child seed for a named stream. FNV-1a over the name, mixed with the
// base seed; used so that e.g. member k of an ensemble has stream "member/k".
inline std::uint64_t stream_seed(std::uint64_t base, const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h ^ (base + 0x9e3779b97f4a7c15ULL);
}

struct CoherentState {
    Eigen::VectorXcd amps;
    bool pole_warning = false; // theta* at a pole: phase phi* is then meaningless
};

// |theta,phi> = exp(-i phi Sz) exp(-i theta Sy) |m=S>, so that
// <S>/S = (sin t cos p, sin t sin p, cos t). Amplitudes:
//   c_m = sqrt(C(2S, S+m)) cos(t/2)^(S+m) sin(t/2)^(S-m) exp(-i m phi)
inline CoherentState coherent_state(const SpinParameters& sp, double theta_star,
                                    double phi_star) {
    CoherentState st;
    const int dim = sp.dim;
    st.amps.resize(dim);

    const double ct = std::cos(theta_star / 2.0);
    const double stt = std::sin(theta_star / 2.0);
    const double pole_tol = 1e-12;
    if (std::abs(stt) < pole_tol || std::abs(ct) < pole_tol) {
        // Packet sits on a pole: it degenerates to a single |m| = S basis state.
        st.pole_warning = true;
        st.amps.setZero();
        if (std::abs(stt) < pole_tol)
            st.amps[dim - 1] = 1.0; // theta = 0 -> |m=+S>
        else
            st.amps[0] = 1.0; // theta = pi -> |m=-S>
        return st;
    }

    const double lct = std::log(std::abs(ct));
    const double lst = std::log(std::abs(stt));
    const int S = sp.S;
    for (int k = 0; k < dim; ++k) {
        const int mpS = k;          // S + m
        const int SmM = dim - 1 - k; // S - m
        const double logbin = std::lgamma(2.0 * S + 1.0) - std::lgamma(mpS + 1.0) -
                              std::lgamma(SmM + 1.0);
        const double logamp = 0.5 * logbin + mpS * lct + SmM * lst;
        const double mval = k - S;
        // sign of cos/sin powers: theta in (0,pi) keeps both positive, and the
        // pole branch above handles the rest, so no sign bookkeeping is needed
        st.amps[k] = std::exp(logamp) * std::exp(cplx(0.0, -mval * phi_star));
    }
    st.amps.normalize();
    return st;
}

// i.i.d. complex Gaussian amplitudes, normalized. The 1/sqrt(2) on each
// quadrature is irrelevant after normalization but keeps the raw vector a
// standard complex normal.
inline Eigen::VectorXcd random_state(const SpinParameters& sp, Splitmix64& rng) {
    Eigen::VectorXcd v(sp.dim);
    for (int k = 0; k < sp.dim; ++k)
        v[k] = cplx(rng.normal(), rng.normal()) / std::sqrt(2.0);
    v.normalize();
    return v;
}

// Action-space probability profile |c_m|^2 of a state (its structure function).
inline Eigen::VectorXd structure_function(const Eigen::VectorXcd& amps) {
    return amps.cwiseAbs2();
}

} // namespace echotop
