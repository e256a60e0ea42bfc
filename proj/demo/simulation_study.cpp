// Small-scale version of the simulation study: simulate the DGP, estimate it
// by adaptive MCMC and by maximum likelihood, and print both next to the truth.
#include <cstdio>
#include <cstdlib>

#include "revar/revar.hpp"

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;

    const auto truth = revar::simulation_study_params();
    const auto sim = revar::simulate(truth, n, seed);
    const auto data = sim.as_model_data();
    const auto init = revar::default_initial_params(1, revar::DistKind::SkewT);

    revar::McmcConfig mc;
    mc.n_burn = 5000;
    mc.n_samp = 2500;
    mc.seed = seed;
    const auto post = revar::estimate(data, init, mc);
    const auto ml = revar::fit_ml(data, init);

    const auto names = post.layout.names();
    const auto t = revar::to_natural(truth);
    const auto m = post.mean();
    const auto s = post.stddev();
    const auto l = revar::to_natural(ml.params);
    std::printf("%-10s %10s %10s %10s %10s\n", "param", "true", "mcmc", "sd", "ml");
    for (std::size_t j = 0; j < names.size(); ++j)
        std::printf("%-10s %10.4f %10.4f %10.4f %10.4f\n", names[j].c_str(), t[j], m[j], s[j], l[j]);
    return 0;
}
