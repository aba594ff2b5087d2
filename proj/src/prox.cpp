#include "ipag/prox.hpp"

#include <cmath>
#include <limits>

#include "ipag/error.hpp"

namespace ipag {

ProxQuery::ProxQuery(const NonsmoothPart& nonsmooth, Vector center,
                     double gamma)
    : nonsmooth_(&nonsmooth), center_(std::move(center)), gamma_(gamma) {
  if (!(gamma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "prox gamma must be positive");
  }
}

const ConstraintSet* ProxQuery::constraint_set() const {
  if (const auto* ind = std::get_if<IndicatorOfSet>(nonsmooth_)) {
    return ind->set.get();
  }
  return nullptr;
}

double ProxQuery::distance_term(const Vector& u) const {
  return (u - center_).squaredNorm() / (2.0 * gamma_);
}

double ProxQuery::objective(const Vector& u) const {
  return distance_term(u) + evaluate(*nonsmooth_, u);
}

Vector prox_box(const Vector& y, double gamma, const Vector& lower,
                const Vector& upper) {
  if (y.size() != lower.size() || y.size() != upper.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "prox_box dimension mismatch");
  }
  if (!(gamma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "prox gamma must be positive");
  }
  return y.cwiseMax(lower).cwiseMin(upper);
}

Vector prox_ball(const Vector& y, double gamma, double radius) {
  if (!(radius > 0.0) || !(gamma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "prox_ball needs positive radius and gamma");
  }
  const double norm = y.norm();
  if (norm <= radius) return y;
  return (radius / norm) * y;
}

ProxAccuracy check_prox_accuracy(const ApproxProxResult& candidate,
                                 const ProxQuery& query,
                                 const Vector& reference_solution) {
  ProxAccuracy out;
  const double cand = query.objective(candidate.point);
  const double ref = query.objective(reference_solution);
  if (std::isinf(cand)) {
    out.infeasible_candidate = true;
    out.measured_gap = std::numeric_limits<double>::infinity();
    out.satisfied = false;
    return out;
  }
  out.measured_gap = cand - ref;
  out.satisfied = out.measured_gap <= candidate.rho + 1e-9;
  return out;
}

std::vector<Vector> certificate_probes(const ProxQuery& query,
                                       const Vector& candidate, int count,
                                       Rng& rng) {
  std::vector<Vector> probes;
  probes.reserve(static_cast<std::size_t>(count));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = candidate.size();

  if (const ConstraintSet* set = query.constraint_set()) {
    const Vector& anchor = set->slater_point();
    for (int j = 0; j < count; ++j) {
      Vector u(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        u[i] = set->lower()[i] + unit(rng) * (set->upper()[i] - set->lower()[i]);
      }
      // Pull the sample toward the Slater point until it is feasible.
      double t = 1.0;
      Vector p = u;
      for (int halving = 0; halving < 60 && !set->contains(p); ++halving) {
        t *= 0.5;
        p = anchor + t * (u - anchor);
      }
      if (!set->contains(p)) p = anchor;
      probes.push_back(std::move(p));
    }
    return probes;
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 + (query.center() - candidate).norm();
  for (int j = 0; j < count; ++j) {
    Vector u(n);
    for (Eigen::Index i = 0; i < n; ++i) u[i] = candidate[i] + scale * normal(rng);
    probes.push_back(std::move(u));
  }
  return probes;
}

double rho_subgradient_violation(const RhoSubgradientCertificate& certificate,
                                 const Vector& candidate,
                                 const ProxQuery& query,
                                 std::span<const Vector> probes) {
  const double h_x = evaluate(query.nonsmooth(), candidate);
  double worst = -std::numeric_limits<double>::infinity();
  for (const Vector& u : probes) {
    const double h_u = evaluate(query.nonsmooth(), u);
    if (std::isinf(h_u)) continue;  // inequality is vacuous outside dom h
    const double rhs = h_x + certificate.d.dot(u - candidate) - certificate.rho;
    const double scale =
        1e-9 * (1.0 + std::abs(h_u) + certificate.d.norm() * (u - candidate).norm());
    worst = std::max(worst, rhs - h_u - scale);
  }
  return worst;
}

RhoSubgradientCertificate make_certificate(const Vector& candidate,
                                           const ProxQuery& query, double rho,
                                           const Vector& reference_solution,
                                           int probe_count,
                                           std::uint64_t probe_seed) {
  if (rho < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "rho must be nonnegative");
  }
  if (std::isinf(evaluate(query.nonsmooth(), candidate))) {
    throw Error(ErrorCode::kCertificateUnavailable,
                "candidate lies outside dom h");
  }

  RhoSubgradientCertificate cert;
  cert.rho = rho;
  const double radius = std::sqrt(2.0 * query.gamma() * rho);
  cert.v = reference_solution - candidate;
  const double len = cert.v.norm();
  if (len > radius) {
    cert.v *= (len > 0.0 ? radius / len : 0.0);
  }
  cert.d = (query.center() - candidate - cert.v) / query.gamma();

  Rng rng(probe_seed);
  std::vector<Vector> probes =
      certificate_probes(query, candidate, probe_count, rng);
  probes.push_back(reference_solution);
  if (rho_subgradient_violation(cert, candidate, query, probes) > 0.0) {
    throw Error(ErrorCode::kCertificateUnavailable,
                "no v within sqrt(2 gamma rho) passes the probe check");
  }
  return cert;
}

std::vector<double> gamma_recursion(std::span<const double> alphas) {
  std::vector<double> gammas;
  gammas.reserve(alphas.size());
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const double a = alphas[k];
    if (!(a > 0.0 && a <= 1.0)) {
      throw Error(ErrorCode::kInvalidAlpha,
                  "alpha_" + std::to_string(k + 1) + " outside (0, 1]");
    }
    gammas.push_back(k == 0 ? 1.0 : (1.0 - a) * gammas.back());
  }
  return gammas;
}

}  // namespace ipag
