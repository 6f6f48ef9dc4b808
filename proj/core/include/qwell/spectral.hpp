#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "qwell/errors.hpp"

namespace qwell {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;

// Spatial parity of a free eigenmode of the well I = (-1/2, 1/2).
// Odd mode index k -> even cosine mode, even k -> odd sine mode.
enum class Parity { even_function, odd_function };

inline Parity mode_parity(int k) {
    return (k % 2 == 1) ? Parity::even_function : Parity::odd_function;
}

// Free well eigenbasis truncated to the first `modes` levels,
// lambda_k = k^2 pi^2 / 2 in the dimensionless units of the model.
struct FreeBasis {
    int modes = 0;
    Vec lambdas;
    std::vector<Parity> parity;
};

FreeBasis build_free_basis(int modes);

// <x phi_j, phi_k>, 1-based indices. Zero for equal parity (and j == k).
double dipole_element(int j, int k);

// Dense symmetric dipole operator matrix over the first `modes` levels.
Mat dipole_matrix(int modes);

// Numerical eigen-decomposition of the truncated operator
// A_sigma = diag(lambda) - sigma * X in the free basis.
struct SigmaEigenSystem {
    double sigma = 0.0;
    int modes = 0;
    Vec mus;           // eigenvalues, ascending
    Mat vectors;       // column k: coefficients of phi_{k,sigma} in the free basis
    Mat dipole;        // free-basis dipole matrix X
    Mat dipole_sigma;  // V^T X V, the dipole operator in the sigma-eigenbasis
};

// Sign convention: columns flipped so that <phi_{k,sigma}, phi_k> > 0,
// matching the perturbative branch at sigma = 0.
SigmaEigenSystem diagonalize_sigma(const FreeBasis& basis, double sigma);

// Closed-form second-order eigenvalue perturbation coefficient
// 1/(24 pi^2 k^2) - 5/(8 pi^4 k^4).
double lambda2_coefficient(int k);

// Partial sum of the opposite-parity mode series for the same coefficient,
// (2^7/pi^6) sum_j k^2 j^2 / (k^2 - j^2)^5 over j <= jmax, parity(j) != parity(k).
double lambda2_series(int k, long jmax);

// First derivatives of the sigma-eigenpairs, via the spectral sum formulas.
struct EigenDerivatives {
    Vec dlambda;   // d lambda_{k,sigma} / d sigma
    Mat dvectors;  // column k: coefficients of d phi_{k,sigma}/d sigma in the phi_{.,sigma} basis
};

// Requires a simple spectrum; a gap below `gap_tol` raises degeneracy_error.
EigenDerivatives eigen_derivatives(const SigmaEigenSystem& sys, double gap_tol = 1e-10);

// Report on the non-degeneracy of eigenvalue differences
// lambda_{k1,sigma} - lambda_{k2,sigma}, k1 <= N, k2 <= k2max.
struct GapReport {
    double sigma = 0.0;
    int cutoff = 0;
    int k2max = 0;
    double delta = 0.0;             // minimal distance between distinct-index differences
    std::array<int, 2> pair_a{};    // (k1,k2) of the closest pair
    std::array<int, 2> pair_b{};    // (j1,j2) of the closest pair
    bool degenerate = false;        // delta below collision tolerance
    std::vector<std::array<int, 4>> collisions;  // all pairs within collision tolerance
};

GapReport frequency_gap_check(const FreeBasis& basis, double sigma, int cutoff, int k2max,
                              double collision_tol = 1e-9);

// Truncated H^s_(sigma) norm: (sum_k mu_k^s |<psi, phi_{k,sigma}>|^2)^{1/2}.
// psi is given by free-basis coefficients. Requires mu_k > 0 for all retained k.
double hs_sigma_norm(const CVec& psi, const SigmaEigenSystem& sys, double s);

}  // namespace qwell
