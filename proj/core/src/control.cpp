#include "qwell/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qwell {

WaveFunction make_state(CVec coeffs) {
    double n = coeffs.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw numeric_error("make_state: cannot normalize a zero or non-finite vector");
    }
    coeffs /= n;
    return WaveFunction{std::move(coeffs)};
}

double theta_eval(const ThetaSpec& spec, double r) {
    if (r < 0.0) throw std::domain_error("theta_eval: negative argument");
    return std::min(spec.slope() * r, spec.theta_max);
}

ThetaSpec make_theory_safe_theta(double eta, int cutoff, const CalibratedConstants& cal,
                                 double epsilon, double gamma) {
    if (cal.cstar <= 0.0) throw std::domain_error("make_theory_safe_theta: cstar must be positive");
    double nc = cutoff * cal.cstar;
    ThetaSpec spec;
    spec.mode = ThetaMode::theory_safe;
    spec.slope_max = std::min(1.0 / (36.0 * nc), 1.0 / (3.0 * (1.0 + nc)));
    spec.theta_max = std::min(
        {std::sqrt(epsilon * gamma * gamma * cutoff / (32.0 * (1.0 - epsilon / 2.0))) / cal.cstar,
         gamma / (2.0 * cal.cstar),
         cal.sigma_gap_max,
         (std::sqrt(1.0 - epsilon / 2.0) - std::sqrt(1.0 - epsilon)) / cal.cstar});
    spec.eta = std::min(eta, spec.slope_max);
    return spec;
}

double lyapunov_coords(const CVec& c, int cutoff, double epsilon) {
    double value = 1.0 - std::norm(c[0]);
    for (int k = 1; k < cutoff; ++k) value -= (1.0 - epsilon) * std::norm(c[k]);
    return value;
}

double lyapunov(const WaveFunction& psi, const SigmaEigenSystem& sys, int cutoff,
                double epsilon) {
    return lyapunov_coords(psi.sigma_coords(sys), cutoff, epsilon);
}

double feedback_v_coords(const CVec& c, const Mat& dipole_sigma, const FeedbackConfig& cfg) {
    CVec xc = dipole_sigma * c;
    Complex s = 0.0;
    for (int k = 0; k < cfg.cutoff; ++k) {
        double a = (k == 0) ? 1.0 : 1.0 - cfg.epsilon;
        s += a * xc[k] * std::conj(c[k]);
    }
    return -cfg.gain * s.imag();
}

double feedback_v(const WaveFunction& psi, const SigmaEigenSystem& sys,
                  const FeedbackConfig& cfg) {
    return feedback_v_coords(psi.sigma_coords(sys), sys.dipole_sigma, cfg);
}

namespace {

double theta_derivative(const ThetaSpec& spec, double r) {
    return (spec.slope() * r < spec.theta_max) ? spec.slope() : 0.0;
}

// d/dsigma V_{sigma,N,eps}(psi) = -2 sum_k a_k Re(<psi, dphi_k> conj<psi, phi_k>).
double lyapunov_sigma_derivative(const CVec& c, const EigenDerivatives& derivs, int cutoff,
                                 double epsilon) {
    double acc = 0.0;
    for (int k = 0; k < cutoff; ++k) {
        double a = (k == 0) ? 1.0 : 1.0 - epsilon;
        Complex overlap = 0.0;  // <psi, dphi_k/dsigma>
        for (int j = 0; j < c.size(); ++j) overlap += c[j] * derivs.dvectors(j, k);
        acc += a * (overlap * std::conj(c[k])).real();
    }
    return -2.0 * acc;
}

}  // namespace

ImplicitSigmaResult implicit_sigma(const WaveFunction& psi, const FreeBasis& basis,
                                   const FeedbackConfig& cfg, double tol, int max_iter,
                                   double warm_start) {
    if (tol <= 0.0) throw std::domain_error("implicit_sigma: tol must be positive");
    if (psi.norm() > 2.0) throw std::domain_error("implicit_sigma: state outside B(0,2)");
    const ThetaSpec& spec = cfg.theta;

    // V in [0,1] on the unit sphere, so theta(V) <= min(slope, theta_max).
    double upper = std::min(spec.slope() * 1.0001, spec.theta_max);
    if (!(upper > 0.0)) {
        ImplicitSigmaResult res;
        res.sigma = 0.0;
        res.iterations = 1;
        res.residual = 0.0;
        res.system = diagonalize_sigma(basis, 0.0);
        return res;
    }

    double sigma = std::clamp(warm_start, 0.0, upper);
    double lo = 0.0, hi = upper;  // F(0) <= 0 <= F(upper) for F(s) = s - theta(V_s)
    ImplicitSigmaResult res;
    double prev_sigma = sigma, prev_f = 0.0;
    bool have_prev = false;

    for (int iter = 1; iter <= max_iter; ++iter) {
        SigmaEigenSystem sys = diagonalize_sigma(basis, sigma);
        CVec c = psi.sigma_coords(sys);
        double value = lyapunov_coords(c, cfg.cutoff, cfg.epsilon);
        double f = sigma - theta_eval(spec, std::max(value, 0.0));
        if (std::abs(f) <= tol) {
            res.sigma = sigma;
            res.iterations = iter;
            res.residual = std::abs(f);
            res.system = std::move(sys);
            return res;
        }
        if (f < 0.0) lo = std::max(lo, sigma); else hi = std::min(hi, sigma);

        // Safeguarded Newton on F(s) = s - theta(V_s(psi)); the plain
        // fixed-point map theta(V_s) need not contract for steep theta.
        double next;
        double dtheta = theta_derivative(spec, std::max(value, 0.0));
        double fprime = 1.0;
        if (dtheta != 0.0) {
            fprime = 1.0 - dtheta * lyapunov_sigma_derivative(c, eigen_derivatives(sys),
                                                              cfg.cutoff, cfg.epsilon);
        }
        if (std::abs(fprime) > 1e-14) {
            next = sigma - f / fprime;
        } else if (have_prev && std::abs(f - prev_f) > 1e-300) {
            next = sigma - f * (sigma - prev_sigma) / (f - prev_f);
        } else {
            next = 0.5 * (lo + hi);
        }
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);

        have_prev = true;
        prev_sigma = sigma;
        prev_f = f;
        sigma = next;
    }
    double ratio = (std::abs(sigma - prev_sigma) > 0.0)
                       ? std::abs((sigma - prev_sigma) / (prev_sigma - lo + 1e-300))
                       : 0.0;
    throw contraction_error(sigma, prev_sigma, ratio, max_iter);
}

int choose_cutoff(double gamma_bound, double s, double epsilon, double gamma, double cstar,
                  double sigma_star, int nmax) {
    if (!(gamma_bound > 0.0) || !(s > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) ||
        !(gamma > 0.0 && gamma < 1.0)) {
        throw std::domain_error("choose_cutoff: parameters out of range");
    }
    double rhs = epsilon * gamma * gamma / (1.0 - epsilon);
    for (int n = 1; n <= nmax; ++n) {
        double lam = 0.5 * double(n + 1) * double(n + 1) * std::numbers::pi * std::numbers::pi;
        double denom = lam - cstar * sigma_star * sigma_star / double(n + 1);
        if (denom <= 0.0) continue;
        if (gamma_bound * gamma_bound / std::pow(denom, s) <= rhs) return n;
    }
    throw invalid_truncation("choose_cutoff: no admissible cutoff <= " + std::to_string(nmax));
}

InitialConditionReport validate_initial_condition(const WaveFunction& psi,
                                                  const SigmaEigenSystem& sys,
                                                  const FeedbackConfig& cfg, double gamma,
                                                  LawVariant variant) {
    CVec c = psi.sigma_coords(sys);
    InitialConditionReport report;
    report.gamma = gamma;
    report.truncation = sys.modes;
    report.first_overlap = std::abs(c[0]);
    for (int k = cfg.cutoff; k < sys.modes; ++k) report.tail_mass += std::norm(c[k]);
    report.tail_threshold =
        (variant == LawVariant::explicit_law)
            ? cfg.epsilon * gamma * gamma / (1.0 - cfg.epsilon)
            : cfg.epsilon * gamma * gamma / (32.0 * (1.0 - cfg.epsilon / 2.0));
    report.tail_ok = report.tail_mass < report.tail_threshold;
    report.overlap_ok = report.first_overlap >= gamma;
    report.pass = report.tail_ok && report.overlap_ok;
    return report;
}

CalibratedConstants calibrate_cstar(const FreeBasis& basis,
                                    const std::vector<double>& sigma_samples, int kmax) {
    if (sigma_samples.empty()) {
        throw std::domain_error("calibrate_cstar: need at least one sigma sample");
    }
    kmax = std::min(kmax, basis.modes);
    CalibratedConstants cal;

    std::vector<std::pair<double, Mat>> vector_samples;
    for (double sigma : sigma_samples) {
        SigmaEigenSystem sys = diagonalize_sigma(basis, sigma);
        try {
            EigenDerivatives derivs = eigen_derivatives(sys);
            for (int k = 0; k < kmax; ++k) {
                cal.cstar = std::max(cal.cstar, (k + 1) * derivs.dvectors.col(k).norm());
            }
        } catch (const degeneracy_error&) {
            continue;  // excluded sample
        }
        vector_samples.emplace_back(sigma, sys.vectors);
    }
    // Lipschitz surrogate from divided differences of the eigenvectors.
    for (size_t i = 0; i + 1 < vector_samples.size(); ++i) {
        double ds = vector_samples[i + 1].first - vector_samples[i].first;
        if (std::abs(ds) < 1e-12) continue;
        for (int k = 0; k < kmax; ++k) {
            double diff = (vector_samples[i + 1].second.col(k) -
                           vector_samples[i].second.col(k)).norm();
            cal.cstar = std::max(cal.cstar, (k + 1) * diff / std::abs(ds));
        }
    }

    int gap_cutoff = std::min(kmax, basis.modes);
    for (double sigma : sigma_samples) {
        if (sigma < 0.0) continue;
        GapReport gap = frequency_gap_check(basis, sigma, gap_cutoff, basis.modes, 1e-6);
        if (!gap.degenerate) cal.sigma_gap_max = std::max(cal.sigma_gap_max, sigma);
    }
    return cal;
}

double mu_factor(const WaveFunction& psi, const SigmaEigenSystem& sys,
                 const EigenDerivatives& derivs, const ThetaSpec& spec, int cutoff,
                 double epsilon) {
    CVec c = psi.sigma_coords(sys);
    double value = lyapunov_coords(c, cutoff, epsilon);
    double dtheta = theta_derivative(spec, std::max(value, 0.0));
    // 1/mu = 1 + 2 theta'(V) Re(sum a_k <psi,phi_k> <dphi_k/dsigma, psi>)
    //      = 1 - theta'(V) dV/dsigma.
    double inv_mu = 1.0 - dtheta * lyapunov_sigma_derivative(c, derivs, cutoff, epsilon);
    if (inv_mu <= 0.0) {
        throw numeric_error("mu_factor: nonpositive 1/mu = " + std::to_string(inv_mu) +
                            " (theta slope too steep)");
    }
    return 1.0 / inv_mu;
}

}  // namespace qwell
