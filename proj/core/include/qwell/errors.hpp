#pragma once

#include <stdexcept>
#include <string>

namespace qwell {

// Exit codes used by the CLI; library exceptions map onto them.
enum class ExitCode : int {
    ok = 0,
    check_failure = 1,
    config_failure = 2,
    numeric_failure = 3,
};

struct invalid_truncation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a spectral-gap-dividing formula meets a (near-)degenerate pair.
struct degeneracy_error : numeric_error {
    int k_lo;
    int k_hi;
    double gap;
    degeneracy_error(int lo, int hi, double g)
        : numeric_error("near-degenerate eigenvalue pair (" + std::to_string(lo) + "," +
                        std::to_string(hi) + "), gap " + std::to_string(g)),
          k_lo(lo), k_hi(hi), gap(g) {}
};

// Fixed-point solve for the implicit field strength did not reach tolerance.
struct contraction_error : numeric_error {
    double last_iterate;
    double previous_iterate;
    double empirical_ratio;
    int iterations;
    contraction_error(double last, double prev, double ratio, int iters)
        : numeric_error("implicit sigma fixed point did not converge after " +
                        std::to_string(iters) + " iterations (last iterates " +
                        std::to_string(prev) + " -> " + std::to_string(last) +
                        ", empirical ratio " + std::to_string(ratio) + ")"),
          last_iterate(last), previous_iterate(prev),
          empirical_ratio(ratio), iterations(iters) {}
};

struct prepump_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    int line;  // 0 when the error is not tied to a specific line
    config_error(const std::string& what, int line_number = 0)
        : std::runtime_error(line_number > 0
                                 ? "line " + std::to_string(line_number) + ": " + what
                                 : what),
          line(line_number) {}
};

}  // namespace qwell
