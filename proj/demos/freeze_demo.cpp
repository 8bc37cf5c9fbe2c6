// Fidelity freeze at a glance: evolve one coherent packet under the twist
// map with a weak transverse kick and watch the echo sit on the predicted
// plateau until t2, then die on the Gaussian scale t_coh.
//
// Runs in a few seconds at S=100 and prints a log-spaced table comparing the
// measured fidelity with the plateau and Gaussian-decay predictions.

#include <echotop/echo.hpp>
#include <echotop/semiclassics.hpp>
#include <echotop/states.hpp>

#include <cstdio>

int main() {
    using namespace echotop;

    const SpinParameters sp = SpinParameters::make(100);
    const TopParameters top{1.1, 0.0, 0.0, 0.0};
    const double delta = 0.32 / sp.S;
    const double theta_star = 1.0, phi_star = 1.0;

    const AngularMomentumOps ops(sp);
    const UnperturbedPropagator u0(sp, top);
    const KickPropagator kick(ops, delta);
    const CoherentState state = coherent_state(sp, theta_star, phi_star);

    const TheoryBundle th = make_theory_bundle(sp, top, delta, theta_star,
                                               StateKind::Coherent, 0.0);
    std::printf("S=%d  delta*S=%.3f  packet at (theta,phi)=(%g,%g), j*=%.6f\n", sp.S,
                delta * sp.S, theta_star, phi_star, th.j_star);
    std::printf("plateau prediction   %.6f\n", th.plateau);
    std::printf("t1=%.1f  t2=%.1f  t_coh=%.1f  t_r=%.1f\n",
                th.times.t1 ? *th.times.t1 : 0.0, th.times.t2, th.times.t_coh,
                th.times.t_r);

    const long t_max = 12000;
    const FidelityTrace tr = run_fidelity(state.amps, u0, kick, t_max, 1);

    std::printf("\n%8s %12s %12s %12s\n", "t", "F", "plateau", "gauss");
    for (long t = 1; t <= t_max; t = std::max(t + 1, (t * 5) / 4)) {
        const std::vector<cplx> g = gaussian_decay_coherent(sp, top, th.j_star, delta,
                                                            {static_cast<double>(t)});
        std::printf("%8ld %12.6f %12.6f %12.6f\n", t, tr.fidelity[t], th.plateau,
                    th.plateau * std::norm(g[0]));
    }
    std::printf("\nThe freeze holds near %g until t ~ %g, far beyond the perturbative\n"
                "expectation; the late decay follows the Gaussian envelope.\n",
                th.plateau, th.times.t2);
    return 0;
}
