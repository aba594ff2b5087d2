#pragma once

#include "ipag/types.hpp"

namespace ipag {

struct PowerIterationResult {
  double value = 0.0;
  Vector vector;
  int iterations = 0;
  bool converged = false;
};

/**
 * Largest-magnitude eigenvalue of a symmetric matrix by power iteration.
 *
 * Iterates on S^2 so that a pair of eigenvalues of equal magnitude and
 * opposite sign does not make the iterate oscillate; the sign is recovered
 * from the Rayleigh quotient of S at the limit vector.
 */
PowerIterationResult dominant_eigenvalue(const Matrix& symmetric,
                                         double tol = 1e-8,
                                         int max_iterations = 10000);

/// Smallest eigenvalue via power iteration on (s I - S), s = |lambda|_max.
double smallest_eigenvalue(const Matrix& symmetric, double tol = 1e-8,
                           int max_iterations = 10000);

/// Spectral norm (largest |eigenvalue|) of a symmetric matrix.
inline double spectral_norm(const Matrix& symmetric, double tol = 1e-8,
                            int max_iterations = 10000) {
  return std::abs(dominant_eigenvalue(symmetric, tol, max_iterations).value);
}

}  // namespace ipag
