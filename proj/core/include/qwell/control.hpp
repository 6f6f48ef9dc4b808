#pragma once

#include <limits>
#include <vector>

#include "qwell/spectral.hpp"

namespace qwell {

// State coefficients in the free eigenbasis; unit L2 norm on construction.
struct WaveFunction {
    CVec coeffs;

    int modes() const { return int(coeffs.size()); }
    double norm() const { return coeffs.norm(); }
    // Coordinates in the phi_{.,sigma} basis.
    CVec sigma_coords(const SigmaEigenSystem& sys) const {
        return sys.vectors.transpose() * coeffs;
    }
};

// Normalizes; throws numeric_error on a zero vector.
WaveFunction make_state(CVec coeffs);

// Shaping function theta(r) = min(slope * r, theta_max), slope = min(eta, slope_max).
enum class ThetaMode { theory_safe, paper_sim };

struct ThetaSpec {
    double eta = 0.0;
    double theta_max = std::numeric_limits<double>::infinity();
    double slope_max = std::numeric_limits<double>::infinity();
    ThetaMode mode = ThetaMode::paper_sim;

    double slope() const { return eta < slope_max ? eta : slope_max; }
};

double theta_eval(const ThetaSpec& spec, double r);

// Empirical surrogates for the paper-level spectral constants.
struct CalibratedConstants {
    double cstar = 0.0;          // sampled sup of k * |d phi_k / d sigma| (lower bound on true C*)
    double sigma_gap_max = 0.0;  // largest sampled |sigma| with a healthy frequency gap
};

// theory_safe spec: slope and amplitude capped by the admissibility bounds
// computed from the calibrated constants; eta is clipped, never raised.
ThetaSpec make_theory_safe_theta(double eta, int cutoff, const CalibratedConstants& cal,
                                 double epsilon, double gamma);

enum class SigmaMode { fixed_field, implicit_lyapunov };

struct FeedbackConfig {
    int cutoff = 3;          // N
    double epsilon = 0.05;
    double gain = 1.0;       // varsigma
    SigmaMode sigma_mode = SigmaMode::fixed_field;
    double sigma = 0.0;      // fixed_field only
    ThetaSpec theta;         // implicit_lyapunov only
};

// V_{sigma,N,eps}(psi) = 1 - |<psi,phi_1s>|^2 - (1-eps) sum_{k=2..N} |<psi,phi_ks>|^2.
double lyapunov(const WaveFunction& psi, const SigmaEigenSystem& sys, int cutoff,
                double epsilon);
double lyapunov_coords(const CVec& sigma_coords, int cutoff, double epsilon);

// v = -gain * Im( sum_k a_k <x psi, phi_ks> conj<psi, phi_ks> ), a_1 = 1, a_k = 1-eps.
// This sign makes dV/dt = -2 v^2 / gain along the closed loop.
double feedback_v(const WaveFunction& psi, const SigmaEigenSystem& sys,
                  const FeedbackConfig& cfg);
double feedback_v_coords(const CVec& sigma_coords, const Mat& dipole_sigma,
                         const FeedbackConfig& cfg);

struct ImplicitSigmaResult {
    double sigma = 0.0;
    int iterations = 0;
    double residual = 0.0;
    SigmaEigenSystem system;  // eigen-system at the solved sigma
};

// Solves sigma = theta(V_{sigma,N,eps}(psi)) by warm-started fixed-point
// iteration, with a bracketing fallback when the map is not a contraction.
ImplicitSigmaResult implicit_sigma(const WaveFunction& psi, const FreeBasis& basis,
                                   const FeedbackConfig& cfg, double tol = 1e-12,
                                   int max_iter = 100, double warm_start = 0.0);

// Smallest N >= 1 with Gamma^2 / (lambda_{N+1} - cstar sigma_star^2/(N+1))^s
// <= eps gamma^2 / (1-eps). Throws invalid_truncation when no N <= nmax works.
int choose_cutoff(double gamma_bound, double s, double epsilon, double gamma,
                  double cstar, double sigma_star, int nmax = 200);

enum class LawVariant { explicit_law, implicit_law };

struct InitialConditionReport {
    bool pass = false;
    bool tail_ok = false;
    bool overlap_ok = false;
    double tail_mass = 0.0;      // truncated at M, reported as such
    double tail_threshold = 0.0;
    double first_overlap = 0.0;  // |<psi, phi_{1,sigma}>|
    double gamma = 0.0;
    int truncation = 0;
};

InitialConditionReport validate_initial_condition(const WaveFunction& psi,
                                                  const SigmaEigenSystem& sys,
                                                  const FeedbackConfig& cfg, double gamma,
                                                  LawVariant variant);

// Samples k * |d phi_k/d sigma| and divided differences over the given sigma
// grid; sweeps the frequency gap to bound the usable field strength.
CalibratedConstants calibrate_cstar(const FreeBasis& basis,
                                    const std::vector<double>& sigma_samples, int kmax);

// mu from 1/mu = 1 + 2 theta'(V) Re( sum_k a_k <psi,phi_ks> <dphi_k/dsigma, psi> ).
double mu_factor(const WaveFunction& psi, const SigmaEigenSystem& sys,
                 const EigenDerivatives& derivs, const ThetaSpec& spec, int cutoff,
                 double epsilon);

}  // namespace qwell
