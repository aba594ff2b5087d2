#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ipag/model.hpp"

namespace ipag {

/// argmin_u h(u) + ||u - center||^2 / (2 gamma).
class ProxQuery {
 public:
  ProxQuery(const NonsmoothPart& nonsmooth, Vector center, double gamma);

  const NonsmoothPart& nonsmooth() const { return *nonsmooth_; }
  const Vector& center() const { return center_; }
  double gamma() const { return gamma_; }

  /// The constraint set when h is an indicator, else nullptr.
  const ConstraintSet* constraint_set() const;

  /// ||u - center||^2 / (2 gamma) + h(u).
  double objective(const Vector& u) const;

  /// The quadratic part only, ignoring h.
  double distance_term(const Vector& u) const;

 private:
  const NonsmoothPart* nonsmooth_;
  Vector center_;
  double gamma_;
};

/**
 * Inexact prox point with its accuracy claims.
 *
 * `rho` is the objective-gap accuracy ("rho-approximate"); `distance_bound`
 * bounds ||point - exact prox||^2. Exact solvers report both as zero.
 */
struct ApproxProxResult {
  Vector point;
  double rho = 0.0;
  double distance_bound = 0.0;
  int inner_iters = 0;

  /// A-posteriori duality bound on (objective(point) - optimum), for
  /// feasible points; +inf when the point is infeasible.
  double suboptimality = 0.0;
  /// max(box violation, max_i [phi_i]_+) at `point`.
  double infeasibility = 0.0;
  /// Restoration weight applied toward the Slater point (0 when none).
  double kappa = 0.0;
  std::int64_t constraint_evals = 0;
  /// Set when the dual iterate hit its cap (Slater failure or bad scaling).
  bool dual_clipped = false;
};

Vector prox_box(const Vector& y, double gamma, const Vector& lower,
                const Vector& upper);

Vector prox_ball(const Vector& y, double gamma, double radius);

struct ProxAccuracy {
  bool satisfied = false;
  double measured_gap = 0.0;
  bool infeasible_candidate = false;
};

/// Compares a candidate's prox objective with a high-accuracy reference.
ProxAccuracy check_prox_accuracy(const ApproxProxResult& candidate,
                                 const ProxQuery& query,
                                 const Vector& reference_solution);

/// (y - x - v) / gamma is a rho-subgradient of h at x, with ||v||^2 <= 2 gamma rho.
struct RhoSubgradientCertificate {
  Vector v;
  Vector d;
  double rho = 0.0;
};

/**
 * Builds the rho-subgradient certificate for a rho-approximate prox point.
 *
 * v is taken as the shift from the candidate to the reference prox point,
 * scaled back onto the ball of radius sqrt(2 gamma rho) when longer. This is
 * the choice that maximises slack at the reference probe. The result is
 * validated at `probe_count` random points of dom h plus the reference;
 * throws CertificateUnavailable when the check fails.
 */
RhoSubgradientCertificate make_certificate(const Vector& candidate,
                                           const ProxQuery& query, double rho,
                                           const Vector& reference_solution,
                                           int probe_count = 100,
                                           std::uint64_t probe_seed = 0x1a2b3c);

/// Largest violation of h(u) >= h(x) + <d, u - x> - rho over the probes
/// (<= 0 means the inequality holds everywhere probed).
double rho_subgradient_violation(const RhoSubgradientCertificate& certificate,
                                 const Vector& candidate,
                                 const ProxQuery& query,
                                 std::span<const Vector> probes);

/// Random points in dom h used to probe the rho-subgradient inequality.
std::vector<Vector> certificate_probes(const ProxQuery& query,
                                       const Vector& candidate, int count,
                                       Rng& rng);

/// Gamma_1 = 1, Gamma_k = (1 - alpha_k) Gamma_{k-1}. alphas[0] is alpha_1.
std::vector<double> gamma_recursion(std::span<const double> alphas);

}  // namespace ipag
