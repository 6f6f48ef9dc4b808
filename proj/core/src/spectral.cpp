#include "qwell/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qwell {

namespace {

constexpr double kPi = std::numbers::pi;

// sin(m pi / 2) for odd integer m, sign-aware.
int sin_half_pi(long m) {
    long r = m % 4;
    if (r < 0) r += 4;
    return (r == 1) ? 1 : -1;
}

}  // namespace

FreeBasis build_free_basis(int modes) {
    if (modes < 2) {
        throw invalid_truncation("free basis needs at least 2 modes, got " +
                                 std::to_string(modes));
    }
    FreeBasis basis;
    basis.modes = modes;
    basis.lambdas.resize(modes);
    basis.parity.resize(modes);
    for (int k = 1; k <= modes; ++k) {
        basis.lambdas[k - 1] = 0.5 * double(k) * double(k) * kPi * kPi;
        basis.parity[k - 1] = mode_parity(k);
    }
    return basis;
}

double dipole_element(int j, int k) {
    if (j == k || mode_parity(j) == mode_parity(k)) return 0.0;
    // With phi_odd = sqrt(2) cos(k pi x), phi_even = sqrt(2) sin(k pi x):
    //   <x phi_o, phi_e> = I(o+e) + I(e-o),  I(m) = 2 sin(m pi/2) / (m pi)^2, m odd.
    int o = (j % 2 == 1) ? j : k;
    int e = (j % 2 == 1) ? k : j;
    long m1 = long(o) + e;
    long m2 = long(e) - o;
    auto term = [](long m) {
        return 2.0 * sin_half_pi(m) / (double(m) * double(m) * kPi * kPi);
    };
    return term(m1) + term(m2);
}

Mat dipole_matrix(int modes) {
    Mat x = Mat::Zero(modes, modes);
    for (int j = 1; j <= modes; ++j) {
        for (int k = j + 1; k <= modes; ++k) {
            double e = dipole_element(j, k);
            x(j - 1, k - 1) = e;
            x(k - 1, j - 1) = e;
        }
    }
    return x;
}

SigmaEigenSystem diagonalize_sigma(const FreeBasis& basis, double sigma) {
    if (!std::isfinite(sigma)) {
        throw numeric_error("diagonalize_sigma: sigma is not finite");
    }
    const int m = basis.modes;
    SigmaEigenSystem sys;
    sys.sigma = sigma;
    sys.modes = m;
    sys.dipole = dipole_matrix(m);

    Mat h = -sigma * sys.dipole;
    h.diagonal() += basis.lambdas;

    Eigen::SelfAdjointEigenSolver<Mat> solver(h);
    if (solver.info() != Eigen::Success) {
        throw numeric_error("diagonalize_sigma: eigensolver failed at sigma=" +
                            std::to_string(sigma) + ", |H|_max=" +
                            std::to_string(h.cwiseAbs().maxCoeff()));
    }
    sys.mus = solver.eigenvalues();
    sys.vectors = solver.eigenvectors();
    // One Newton orthonormalization step; keeps the propagator unitary to
    // rounding over millions of applications.
    sys.vectors = 0.5 * sys.vectors * (3.0 * Mat::Identity(m, m) -
                                       sys.vectors.transpose() * sys.vectors);
    // Phase convention: <phi_{k,sigma}, phi_k> > 0.
    for (int k = 0; k < m; ++k) {
        if (sys.vectors(k, k) < 0.0) sys.vectors.col(k) = -sys.vectors.col(k);
    }
    sys.dipole_sigma = sys.vectors.transpose() * sys.dipole * sys.vectors;
    return sys;
}

double lambda2_coefficient(int k) {
    // Rayleigh-Schrodinger for A_sigma = -1/2 d^2/dx^2 - sigma x with
    // lambda_k = k^2 pi^2 / 2; the numerically verified coefficient is
    // 1/(24 pi^2 k^2) - 5/(8 pi^4 k^4).
    double k2 = double(k) * k;
    return (1.0 / (24.0 * k2) - 5.0 / (8.0 * kPi * kPi * k2 * k2)) / (kPi * kPi);
}

double lambda2_series(int k, long jmax) {
    // Sum from the tail up; terms decay like j^-8.
    double k2 = double(k) * k;
    double sum = 0.0;
    long start = (mode_parity(int(jmax)) != mode_parity(k)) ? jmax : jmax - 1;
    for (long j = start; j >= 1; j -= 2) {
        if (j == k) continue;
        double j2 = double(j) * j;
        double d = k2 - j2;
        sum += k2 * j2 / (d * d * d * d * d);
    }
    return sum * 128.0 / std::pow(kPi, 6);
}

EigenDerivatives eigen_derivatives(const SigmaEigenSystem& sys, double gap_tol) {
    const int m = sys.modes;
    for (int k = 0; k + 1 < m; ++k) {
        double gap = sys.mus[k + 1] - sys.mus[k];
        if (gap < gap_tol) throw degeneracy_error(k + 1, k + 2, gap);
    }
    EigenDerivatives d;
    d.dlambda.resize(m);
    d.dvectors = Mat::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        d.dlambda[k] = -sys.dipole_sigma(k, k);
        for (int j = 0; j < m; ++j) {
            if (j == k) continue;
            d.dvectors(j, k) = sys.dipole_sigma(j, k) / (sys.mus[j] - sys.mus[k]);
        }
    }
    return d;
}

GapReport frequency_gap_check(const FreeBasis& basis, double sigma, int cutoff, int k2max,
                              double collision_tol) {
    if (cutoff > basis.modes || k2max > basis.modes) {
        throw invalid_truncation("frequency_gap_check: cutoff/k2max exceed truncation");
    }
    SigmaEigenSystem sys = diagonalize_sigma(basis, sigma);

    struct Diff {
        double value;
        int k1, k2;
    };
    std::vector<Diff> diffs;
    diffs.reserve(size_t(cutoff) * k2max);
    for (int k1 = 1; k1 <= cutoff; ++k1) {
        for (int k2 = 1; k2 <= k2max; ++k2) {
            if (k1 == k2) continue;
            diffs.push_back({sys.mus[k1 - 1] - sys.mus[k2 - 1], k1, k2});
        }
    }
    std::sort(diffs.begin(), diffs.end(),
              [](const Diff& a, const Diff& b) { return a.value < b.value; });

    GapReport report;
    report.sigma = sigma;
    report.cutoff = cutoff;
    report.k2max = k2max;
    report.delta = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i + 1 < diffs.size(); ++i) {
        const Diff& a = diffs[i];
        const Diff& b = diffs[i + 1];
        double dist = b.value - a.value;
        if (dist < report.delta) {
            report.delta = dist;
            report.pair_a = {a.k1, a.k2};
            report.pair_b = {b.k1, b.k2};
        }
        if (dist <= collision_tol) {
            report.collisions.push_back({a.k1, a.k2, b.k1, b.k2});
        }
    }
    report.degenerate = report.delta <= collision_tol;
    return report;
}

double hs_sigma_norm(const CVec& psi, const SigmaEigenSystem& sys, double s) {
    if (s < 0.0) throw std::domain_error("hs_sigma_norm: s must be nonnegative");
    if (sys.mus[0] <= 0.0) {
        throw std::domain_error("hs_sigma_norm: nonpositive eigenvalue at sigma=" +
                                std::to_string(sys.sigma));
    }
    CVec c = sys.vectors.transpose() * psi;
    double acc = 0.0;
    for (int k = 0; k < sys.modes; ++k) {
        acc += std::pow(sys.mus[k], s) * std::norm(c[k]);
    }
    return std::sqrt(acc);
}

}  // namespace qwell
