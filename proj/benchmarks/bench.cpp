#include <benchmark/benchmark.h>

#include "qwell/propagate.hpp"

using namespace qwell;

namespace {

WaveFunction sample_state(int modes) {
    CVec c = CVec::Zero(modes);
    c[0] = Complex(0.7, 0.1);
    c[2] = Complex(0.5, -0.3);
    c[5] = Complex(0.2, 0.2);
    return make_state(std::move(c));
}

void bm_split_step(benchmark::State& state) {
    const int m = int(state.range(0));
    FreeBasis basis = build_free_basis(m);
    SigmaEigenSystem sys = diagonalize_sigma(basis, 20.0);
    DipolePropagator xprop = make_dipole_propagator(sys.dipole);
    WaveFunction psi = sample_state(m);
    for (auto _ : state) {
        psi = split_step(psi, sys, xprop, 0.5, 1e-3);
        benchmark::DoNotOptimize(psi.coeffs.data());
    }
}
BENCHMARK(bm_split_step)->Arg(20)->Arg(40)->Arg(80);

void bm_diagonalize_sigma(benchmark::State& state) {
    const int m = int(state.range(0));
    FreeBasis basis = build_free_basis(m);
    double sigma = 1.0;
    for (auto _ : state) {
        SigmaEigenSystem sys = diagonalize_sigma(basis, sigma);
        benchmark::DoNotOptimize(sys.mus.data());
        sigma = (sigma < 20.0) ? sigma + 1e-3 : 1.0;  // defeat caching
    }
}
BENCHMARK(bm_diagonalize_sigma)->Arg(20)->Arg(60)->Arg(200);

void bm_implicit_sigma(benchmark::State& state) {
    FreeBasis basis = build_free_basis(20);
    FeedbackConfig cfg;
    cfg.cutoff = 3;
    cfg.epsilon = 0.05;
    cfg.sigma_mode = SigmaMode::implicit_lyapunov;
    cfg.theta.eta = 700.0;
    WaveFunction psi = sample_state(20);
    double warm = 0.0;
    for (auto _ : state) {
        ImplicitSigmaResult fp = implicit_sigma(psi, basis, cfg, 1e-12, 100, warm);
        warm = fp.sigma;
        benchmark::DoNotOptimize(fp.sigma);
    }
}
BENCHMARK(bm_implicit_sigma);

}  // namespace

BENCHMARK_MAIN();
