// Echo resonances: at multiples of t_r = 2 pi/(hbar omega') the frozen echo
// of a localized packet snaps back toward 1 (and already at t_r/2, because
// the integrated perturbation couples only odd harmonics). A cubic term in
// the twist (gamma != 0) detunes the recurrence and the peak collapses.
//
// Prints the predicted peak positions/widths and the measured maxima for a
// plain and a detuned top.

#include <echotop/echo.hpp>
#include <echotop/semiclassics.hpp>
#include <echotop/states.hpp>

#include <cstdio>

namespace {

double peak_near(const echotop::FidelityTrace& tr, double t_center, double half_window) {
    double best = 0;
    for (size_t i = 0; i < tr.times.size(); ++i)
        if (std::abs(static_cast<double>(tr.times[i]) - t_center) <= half_window)
            best = std::max(best, tr.fidelity[static_cast<Eigen::Index>(i)]);
    return best;
}

} // namespace

int main() {
    using namespace echotop;

    const SpinParameters sp = SpinParameters::make(200);
    const double delta = 0.32 / sp.S;
    const double theta_star = 1.0, phi_star = 1.0;

    for (const double gamma : {0.0, 4.0}) {
        const TopParameters top{1.1, 0.0, gamma, 0.0};
        const AngularMomentumOps ops(sp);
        const UnperturbedPropagator u0(sp, top);
        const KickPropagator kick(ops, delta);
        const CoherentState state = coherent_state(sp, theta_star, phi_star);

        const TheoryBundle th =
            make_theory_bundle(sp, top, delta, theta_star, StateKind::Coherent, 1400.0);
        std::printf("gamma=%g: t_r=%.1f, plateau=%.4f\n", gamma, th.times.t_r, th.plateau);

        const FidelityTrace tr = run_fidelity(state.amps, u0, kick, 1400, 1);
        for (const Resonance& r : th.resonances) {
            const double peak = peak_near(tr, r.time, 3.0 * r.delta_t);
            std::printf("  k/p=%ld/%ld at t=%7.1f  zeta=%6.3f  width=%5.1f  "
                        "measured peak F=%.4f  (suppression bound %.3f)\n",
                        r.k, r.p, r.time, r.zeta, r.delta_t, peak,
                        1.0 / std::sqrt(1.0 + r.zeta * r.zeta));
        }
    }
    std::printf("\nzeta ~ hbar gamma t/(2 Lambda) is the detuning: small at gamma=0\n"
                "(full revivals), order 10 at gamma=4 (revivals crushed).\n");
    return 0;
}
