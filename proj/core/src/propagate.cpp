#include "qwell/propagate.hpp"

#include <cmath>
#include <numbers>

namespace qwell {

namespace {

constexpr double kPi = std::numbers::pi;

void validate(const SimulationConfig& config) {
    if (config.truncation < 2) throw invalid_truncation("simulation truncation must be >= 2");
    if (!(config.dt > 0.0)) throw config_error("dt must be positive");
    if (!(config.horizon >= config.dt)) throw config_error("horizon must be >= dt");
    if (config.record_every < 1) throw config_error("record_every must be >= 1");
    if (config.initial.empty()) throw config_error("initial state is empty");
    const FeedbackConfig& fb = config.feedback;
    if (fb.cutoff < 1 || fb.cutoff > config.truncation) {
        throw config_error("cutoff N must satisfy 1 <= N <= M");
    }
    if (!(fb.epsilon > 0.0 && fb.epsilon < 1.0)) throw config_error("epsilon must be in (0,1)");
    if (!(fb.gain > 0.0)) throw config_error("gain must be positive");
}

WaveFunction build_initial_state(const SimulationConfig& config, const SigmaEigenSystem& sys) {
    CVec c = CVec::Zero(config.truncation);
    for (const InitialMode& m : config.initial) {
        if (m.mode < 1 || m.mode > config.truncation) {
            throw config_error("initial mode index " + std::to_string(m.mode) +
                               " outside 1.." + std::to_string(config.truncation));
        }
        c[m.mode - 1] += m.amplitude;
    }
    if (config.initial_basis == InitialBasis::sigma_modes) c = sys.vectors * c;
    return make_state(std::move(c));
}

}  // namespace

DipolePropagator make_dipole_propagator(const Mat& dipole) {
    Eigen::SelfAdjointEigenSolver<Mat> solver(dipole);
    if (solver.info() != Eigen::Success) {
        throw numeric_error("dipole matrix eigen-decomposition failed");
    }
    Mat w = solver.eigenvectors();
    const int m = int(w.rows());
    // Same orthonormality polish as diagonalize_sigma.
    w = 0.5 * w * (3.0 * Mat::Identity(m, m) - w.transpose() * w);
    return DipolePropagator{std::move(w), solver.eigenvalues()};
}

WaveFunction split_step(const WaveFunction& psi, const SigmaEigenSystem& sys,
                        const DipolePropagator& xprop, double v, double dt) {
    const int m = sys.modes;
    auto half_drift = [&](CVec& f) {
        CVec c = sys.vectors.transpose() * f;
        for (int k = 0; k < m; ++k) c[k] *= std::polar(1.0, -sys.mus[k] * dt * 0.5);
        f = sys.vectors * c;
    };
    CVec f = psi.coeffs;
    half_drift(f);
    if (v != 0.0) {
        CVec c = xprop.evecs.transpose() * f;
        for (int k = 0; k < m; ++k) c[k] *= std::polar(1.0, v * dt * xprop.evals[k]);
        f = xprop.evecs * c;
    }
    half_drift(f);
    return WaveFunction{std::move(f)};
}

double dist_to_circle(const WaveFunction& psi, const SigmaEigenSystem& sys, int k) {
    Complex overlap = sys.vectors.col(k - 1).cast<Complex>().dot(psi.coeffs);
    double d2 = psi.coeffs.squaredNorm() + 1.0 - 2.0 * std::abs(overlap);
    return std::sqrt(std::max(d2, 0.0));
}

TimeSeries simulate_closed_loop(const SimulationConfig& config) {
    validate(config);
    const FeedbackConfig& fb = config.feedback;
    const bool implicit = fb.sigma_mode == SigmaMode::implicit_lyapunov;
    const double dt = config.dt;
    const long nsteps = long(std::ceil(config.horizon / dt - 1e-9));

    FreeBasis basis = build_free_basis(config.truncation);
    SigmaEigenSystem sys = diagonalize_sigma(basis, implicit ? 0.0 : fb.sigma);
    DipolePropagator xprop = make_dipole_propagator(sys.dipole);
    WaveFunction psi = build_initial_state(config, sys);

    // Reference mode for the stop criterion: phi_{1,sigma} in fixed mode,
    // the free ground state in implicit mode (target sigma -> 0).
    CVec ref = implicit ? CVec(CVec::Unit(config.truncation, 0))
                        : CVec(sys.vectors.col(0).cast<Complex>());

    TimeSeries ts;
    ts.config = config;
    ts.records.reserve(size_t(nsteps / config.record_every) + 2);
    if (config.store_control) ts.control.reserve(size_t(nsteps));

    double warm_sigma = 0.0;
    double prev_lyap = 0.0, prev_v = 0.0, prev_sigma = 0.0;
    bool have_prev = false;

    for (long n = 0;; ++n) {
        const double t = n * dt;
        double sigma = fb.sigma;
        if (implicit) {
            ImplicitSigmaResult fp = implicit_sigma(psi, basis, fb, 1e-12, 100, warm_sigma);
            sigma = fp.sigma;
            warm_sigma = sigma;
            sys = std::move(fp.system);
            ts.max_fixed_point_residual = std::max(ts.max_fixed_point_residual, fp.residual);
            ts.max_fixed_point_iterations = std::max(ts.max_fixed_point_iterations, fp.iterations);
        }

        CVec c = psi.sigma_coords(sys);
        const double norm = psi.norm();
        if (!std::isfinite(norm)) {
            throw numeric_error("simulate_closed_loop: state became non-finite at t=" +
                                std::to_string(t) + " (last good record t=" +
                                std::to_string(ts.records.empty() ? 0.0
                                                                  : ts.records.back().t) + ")");
        }
        ts.max_norm_drift = std::max(ts.max_norm_drift, std::abs(norm - 1.0));

        const double lyap = lyapunov_coords(c, fb.cutoff, fb.epsilon);
        const double v = feedback_v_coords(c, sys.dipole_sigma, fb);
        const double u = sigma + v;

        if (have_prev) {
            double tol = 10.0 * dt * dt * dt * (1.0 + std::abs(prev_v) * std::abs(prev_sigma));
            ts.max_decrease_excess =
                std::max(ts.max_decrease_excess, (lyap - prev_lyap) - tol);
        }
        prev_lyap = lyap;
        prev_v = v;
        prev_sigma = sigma;
        have_prev = true;

        Complex ref_overlap = ref.dot(psi.coeffs);
        double deficit = 1.0 - std::norm(ref_overlap);
        bool passed = config.stop_overlap_deficit > 0.0 && deficit <= config.stop_overlap_deficit;
        if (passed && ts.first_passage_time < 0.0) ts.first_passage_time = t;

        const bool last = passed || n == nsteps;
        if (n % config.record_every == 0 || last) {
            Record rec;
            rec.t = t;
            rec.sigma = sigma;
            rec.v = v;
            rec.u = u;
            rec.lyapunov = lyap;
            rec.populations.resize(fb.cutoff);
            for (int k = 0; k < fb.cutoff; ++k) rec.populations[k] = std::norm(c[k]);
            rec.norm = norm;
            rec.dist_c1 = std::sqrt(std::max(norm * norm + 1.0 - 2.0 * std::abs(c[0]), 0.0));
            rec.target_overlap_sq = std::norm(ref_overlap);
            if (implicit) {
                rec.mu = mu_factor(psi, sys, eigen_derivatives(sys), fb.theta, fb.cutoff,
                                   fb.epsilon);
            }
            ts.records.push_back(std::move(rec));
        }
        if (config.store_states_every > 0 && n % config.store_states_every == 0) {
            ts.states.emplace_back(t, psi.coeffs);
        }
        if (last) {
            ts.stopped_early = passed && n < nsteps;
            break;
        }

        if (config.store_control) ts.control.push_back(u);
        psi = split_step(psi, sys, xprop, v, dt);
    }
    return ts;
}

PrepumpResult resonance_prepump(const WaveFunction& psi, const SigmaEigenSystem& sys,
                                double target_overlap, double amplitude, double dt,
                                double horizon_periods) {
    CVec c = psi.sigma_coords(sys);
    PrepumpResult result{{}, psi, 0.0};
    if (std::abs(c[0]) >= target_overlap) return result;

    int source = -1;
    for (int k = 1; k < sys.modes; ++k) {
        if (std::norm(c[k]) > 1e-12) {
            source = k;
            break;
        }
    }
    if (source < 0) throw prepump_error("resonance_prepump: no populated mode to pump from");

    const double omega = sys.mus[source] - sys.mus[0];
    const double horizon = horizon_periods * 2.0 * kPi / omega;
    DipolePropagator xprop = make_dipole_propagator(sys.dipole);

    WaveFunction state = psi;
    for (double t = 0.0; t < horizon; t += dt) {
        double u = amplitude * std::cos(omega * t);
        result.control.push_back(u);
        state = split_step(state, sys, xprop, u - sys.sigma, dt);
        c = state.sigma_coords(sys);
        if (std::abs(c[0]) >= target_overlap) {
            result.state = std::move(state);
            result.elapsed = t + dt;
            return result;
        }
    }
    throw prepump_error("resonance_prepump: target overlap " + std::to_string(target_overlap) +
                        " not reached within " + std::to_string(horizon) + " time units");
}

}  // namespace qwell
