#include "ipag/linalg.hpp"

#include <cmath>

namespace ipag {

namespace {

Vector start_vector(Eigen::Index n) {
  // Deterministic and generically not orthogonal to any eigenvector.
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = 1.0 + 0.1 * std::sin(1.0 + 3.0 * static_cast<double>(i));
  }
  return v.normalized();
}

}  // namespace

PowerIterationResult dominant_eigenvalue(const Matrix& symmetric, double tol,
                                         int max_iterations) {
  PowerIterationResult result;
  const Eigen::Index n = symmetric.rows();
  if (n == 0) return result;

  Vector v = start_vector(n);
  double estimate = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    const Vector sv = symmetric * v;
    const Vector ssv = symmetric * sv;
    const double norm = ssv.norm();
    result.iterations = it;
    if (norm == 0.0) {
      // v lies in the null space of S^2; S is nilpotent on the span and
      // symmetric, so the dominant magnitude is zero there.
      estimate = 0.0;
      result.converged = true;
      break;
    }
    // ||S v||^2 = v' S^2 v is the Rayleigh quotient of S^2.
    const double next = std::sqrt(sv.squaredNorm());
    v = ssv / norm;
    if (it > 1 && std::abs(next - estimate) <= tol * std::max(1.0, next)) {
      estimate = next;
      result.converged = true;
      break;
    }
    estimate = next;
  }
  const double rayleigh = v.dot(symmetric * v);
  result.value = rayleigh < 0.0 ? -estimate : estimate;
  // Final magnitude from the converged vector.
  result.value = std::copysign((symmetric * v).norm(), result.value);
  result.vector = v;
  return result;
}

double smallest_eigenvalue(const Matrix& symmetric, double tol,
                           int max_iterations) {
  const Eigen::Index n = symmetric.rows();
  if (n == 0) return 0.0;
  const double shift = spectral_norm(symmetric, tol, max_iterations);
  Matrix shifted = -symmetric;
  shifted.diagonal().array() += shift;
  // shifted is PSD; its top eigenvalue is shift - lambda_min.
  const PowerIterationResult top =
      dominant_eigenvalue(shifted, tol, max_iterations);
  return shift - top.value;
}

}  // namespace ipag
