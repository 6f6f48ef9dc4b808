#pragma once

#include <string>
#include <vector>

#include "qwell/propagate.hpp"

namespace qwell {

// Finite-difference state on uniform interior points of I = (-1/2, 1/2),
// dx = 1/(n+1); Dirichlet ends implied.
struct GridState {
    int n = 0;
    CVec values;
    double dx = 0.0;
};

// Samples the free-basis closed forms on the grid; discrete L2-normalized.
GridState state_to_grid(const WaveFunction& psi, int n);

// Discrete projection of a grid state onto the first `modes` free eigenmodes.
WaveFunction grid_to_state(const GridState& g, int modes);

// Discrete L2 norm / inner-product weight dx.
double grid_norm(const GridState& g);

// One implicit-midpoint (Crank-Nicolson) step of the finite-difference
// Hamiltonian H = -1/2 d^2/dx^2 - (sigma + v) x. Unconditionally unitary.
GridState crank_nicolson_step(const GridState& g, double sigma, double v, double dt);

struct CheckReport {
    std::string name;
    bool pass = false;
    std::vector<std::pair<std::string, double>> measured;
    double tolerance = 0.0;
    std::string context;
    std::string worst;  // description of the worst offending sample on failure
};

std::string format_report(const CheckReport& report);

// Replays a recorded per-step control open-loop on the grid oracle and
// reports the final-time L2 discrepancy with the Galerkin propagation.
CheckReport cross_validate(const SimulationConfig& config,
                           const std::vector<double>& control, int n);

// Centered finite differences of V against the analytic closed-loop rate
// (-2 v^2 / gain explicit; mu-corrected implicit), where |v| > 1e-6 gain.
// Errors are relative to the peak analytic rate of the run: near zero
// crossings of v the pointwise-relative error is O(1) for any step size.
CheckReport check_decrease_rate(const TimeSeries& ts, SigmaMode mode);

// Bundled perturbation-theory checks at a large truncation: sigma-sweep fit
// of the second-order coefficient, closed form vs series, dipole
// non-vanishing, and the k-scaling of the eigenvector derivatives.
CheckReport check_perturbation_suite(int truncation);

// Trailing-window convergence: min over the last `window_fraction` of the run
// of the target overlap squared; pass iff >= 1 - epsilon.
CheckReport convergence_report(const TimeSeries& ts, double epsilon,
                               double window_fraction = 0.1);

}  // namespace qwell
