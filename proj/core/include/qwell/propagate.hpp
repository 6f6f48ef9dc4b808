#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qwell/control.hpp"

namespace qwell {

// Eigen-decomposition of the dipole matrix X, used to apply the control
// factor exp(i dt v x) exactly in the Galerkin basis.
struct DipolePropagator {
    Mat evecs;
    Vec evals;
};

DipolePropagator make_dipole_propagator(const Mat& dipole);

// One Strang step exp(-i dt A_sigma/2) exp(i dt v x) exp(-i dt A_sigma/2).
// Every factor is applied via exact eigen-decompositions; unitary to rounding.
WaveFunction split_step(const WaveFunction& psi, const SigmaEigenSystem& sys,
                        const DipolePropagator& xprop, double v, double dt);

struct InitialMode {
    int mode = 1;  // 1-based
    Complex amplitude{1.0, 0.0};
};

enum class InitialBasis { free_modes, sigma_modes };

struct SimulationConfig {
    int truncation = 20;  // M
    double dt = 1e-3;
    double horizon = 0.0;  // T
    std::vector<InitialMode> initial;
    InitialBasis initial_basis = InitialBasis::sigma_modes;
    FeedbackConfig feedback;
    int record_every = 1;

    // Optional instrumentation / early exit (0 disables).
    double stop_overlap_deficit = 0.0;  // stop once 1-|<psi,phi_1,ref>|^2 <= this
    bool store_control = false;         // keep per-step u(t)
    int store_states_every = 0;         // keep state snapshots every n steps
};

struct Record {
    double t = 0.0;
    double sigma = 0.0;
    double v = 0.0;
    double u = 0.0;
    double lyapunov = 0.0;
    std::vector<double> populations;  // |<psi, phi_{k,sigma}>|^2, k = 1..N
    double norm = 0.0;
    double dist_c1 = 0.0;
    double target_overlap_sq = 0.0;  // |<psi, phi_{1,sigma_ref}>|^2 (fixed sigma / free basis)
    double mu = 1.0;                 // implicit mode only
};

struct TimeSeries {
    std::vector<Record> records;
    SimulationConfig config;
    std::string scheme = "strang-split/galerkin";

    std::vector<double> control;  // per-step u, when store_control
    std::vector<std::pair<double, CVec>> states;  // (t, free-basis coefficients) snapshots

    // Run-level diagnostics.
    double max_norm_drift = 0.0;            // max |norm - 1|
    double max_decrease_excess = 0.0;       // max over steps of dV - 10 dt^3 (1+|v||sigma|)
    double max_fixed_point_residual = 0.0;  // implicit mode
    int max_fixed_point_iterations = 0;     // implicit mode
    double first_passage_time = -1.0;       // first t with deficit <= stop threshold
    bool stopped_early = false;
};

// Closed-loop run: per step determine sigma (fixed or implicit, warm-started),
// evaluate v, apply one split step with u = sigma + v held over the step.
TimeSeries simulate_closed_loop(const SimulationConfig& config);

// Distance to the phase circle of phi_{k,sigma}: sqrt(|psi|^2 + 1 - 2|<psi,phi_k,sigma>|).
double dist_to_circle(const WaveFunction& psi, const SigmaEigenSystem& sys, int k);

struct PrepumpResult {
    std::vector<double> control;  // per-step u samples (empty when no drive was needed)
    WaveFunction state;
    double elapsed = 0.0;
};

// Open-loop resonant drive u(t) = A cos((lambda_j - lambda_1) t) from the lowest
// populated mode j until the ground-state overlap reaches `target_overlap`.
PrepumpResult resonance_prepump(const WaveFunction& psi, const SigmaEigenSystem& sys,
                                double target_overlap, double amplitude = 1.0,
                                double dt = 1e-3, double horizon_periods = 200.0);

}  // namespace qwell
