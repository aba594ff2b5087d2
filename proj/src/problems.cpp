#include "ipag/problems.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "ipag/error.hpp"
#include "ipag/linalg.hpp"

namespace ipag {

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = unit(rng);
  }
  return out;
}

Vector uniform_vector(Eigen::Index size, Rng& rng) {
  return uniform_matrix(size, 1, rng).col(0);
}

QpInstance build_qp(int n, int m, std::uint64_t seed, double noise_std,
                    DiagonalSampling diagonal) {
  if (m < 1) {
    throw Error(ErrorCode::kInvalidArgument, "QP needs at least one constraint");
  }
  if (noise_std < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "noise_std must be nonnegative");
  }
  Rng rng(seed);
  QpInstance qp;
  qp.n = n;
  qp.m = m;
  qp.p = n / 2;
  qp.noise_std = noise_std;
  qp.A = uniform_matrix(qp.p, n, rng);
  qp.B = uniform_matrix(n, n, rng);
  qp.b = uniform_vector(qp.p, rng);
  qp.D.resize(n);
  std::uniform_int_distribution<int> levels(1, 1000);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < n; ++i) {
    qp.D[i] = diagonal == DiagonalSampling::kDiscreteUniform
                  ? static_cast<double>(levels(rng))
                  : (coin(rng) ? 1000.0 : 1.0);
  }
  std::uniform_real_distribution<double> slack(1.0, 2.0);
  for (int i = 0; i < m; ++i) {
    QuadraticConstraintData c;
    const Matrix M = uniform_matrix(n, n, rng);
    c.Q = M.transpose() * M / static_cast<double>(n);
    c.d = uniform_vector(n, rng);
    c.c = slack(rng);
    qp.constraints.push_back(std::move(c));
  }

  // tau_obj = 1 and delta chosen so the negative curvature term dominates
  // along the top eigenvector of (DB)'(DB).
  qp.tau_obj = 1.0;
  qp.DB = qp.D.asDiagonal() * qp.B;
  const double top_ata = spectral_norm(qp.A.transpose() * qp.A);
  const double top_dbdb = spectral_norm(qp.DB.transpose() * qp.DB);
  qp.delta = 2.0 * top_ata / top_dbdb;
  for (int attempt = 0;; ++attempt) {
    finalize_qp(qp);
    if (qp.min_eigenvalue < 0.0 || attempt == 10) break;
    qp.delta *= 2.0;
  }
  return qp;
}

void write_number(std::ostream& out, double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.write(buf, res.ptr - buf);
}

void write_matrix(std::ostream& out, std::string_view tag, const Matrix& M) {
  out << tag << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j > 0) out << ' ';
      write_number(out, M(i, j));
    }
    out << '\n';
  }
}

void write_vector(std::ostream& out, std::string_view tag, const Vector& v) {
  out << tag << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out << ' ';
    write_number(out, v[i]);
  }
  out << '\n';
}

void write_scalar(std::ostream& out, std::string_view tag, double value) {
  out << tag << ' ';
  write_number(out, value);
  out << '\n';
}

class ArchiveReader {
 public:
  explicit ArchiveReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) fail("unexpected end of archive");
    return w;
  }

  void expect(std::string_view tag) {
    const std::string w = word();
    if (w != tag) fail("expected '" + std::string(tag) + "', got '" + w + "'");
  }

  long integer() {
    const std::string w = word();
    long value = 0;
    const auto res = std::from_chars(w.data(), w.data() + w.size(), value);
    if (res.ec != std::errc() || res.ptr != w.data() + w.size()) {
      fail("bad integer '" + w + "'");
    }
    return value;
  }

  double number() {
    const std::string w = word();
    double value = 0.0;
    const auto res = std::from_chars(w.data(), w.data() + w.size(), value);
    if (res.ec != std::errc() || res.ptr != w.data() + w.size()) {
      fail("bad number '" + w + "'");
    }
    return value;
  }

  double scalar(std::string_view tag) {
    expect(tag);
    return number();
  }

  Matrix matrix(std::string_view tag, long rows, long cols) {
    expect(tag);
    if (integer() != rows || integer() != cols) fail("shape of " + std::string(tag));
    Matrix M(rows, cols);
    for (long i = 0; i < rows; ++i) {
      for (long j = 0; j < cols; ++j) M(i, j) = number();
    }
    return M;
  }

  Vector vector(std::string_view tag, long size) {
    expect(tag);
    if (integer() != size) fail("length of " + std::string(tag));
    Vector v(size);
    for (long i = 0; i < size; ++i) v[i] = number();
    return v;
  }

  [[noreturn]] void fail(const std::string& what) {
    throw Error(ErrorCode::kParseError, "qp archive: " + what);
  }

 private:
  std::istream& in_;
};

}  // namespace

void finalize_qp(QpInstance& qp) {
  qp.DB = qp.D.asDiagonal() * qp.B;
  qp.hessian = -qp.delta * qp.DB.transpose() * qp.DB +
               qp.tau_obj * qp.A.transpose() * qp.A;
  qp.lipschitz = spectral_norm(qp.hessian);
  qp.min_eigenvalue = smallest_eigenvalue(qp.hessian);
}

double QpInstance::value(const Vector& x) const {
  return -0.5 * delta * (DB * x).squaredNorm() +
         0.5 * tau_obj * (A * x - b).squaredNorm() +
         0.5 * tau_obj * noise_std * noise_std * static_cast<double>(p);
}

double QpInstance::sampled_value(const Vector& x, int samples, Rng& rng) const {
  if (samples < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one sample");
  }
  const Vector residual = A * x - b;
  std::normal_distribution<double> normal(0.0, noise_std);
  double sum = 0.0;
  for (int j = 0; j < samples; ++j) {
    double sq = 0.0;
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
      const double r = residual[i] - (noise_std > 0.0 ? normal(rng) : 0.0);
      sq += r * r;
    }
    sum += sq;
  }
  return -0.5 * delta * (DB * x).squaredNorm() +
         0.5 * tau_obj * sum / static_cast<double>(samples);
}

std::shared_ptr<const ConstraintSet> QpInstance::constraint_set() const {
  std::vector<ConvexConstraint> phis;
  phis.reserve(constraints.size());
  for (const auto& c : constraints) {
    phis.push_back(ConvexConstraint::quadratic(c.Q, c.d, c.c));
  }
  return std::make_shared<const ConstraintSet>(
      Vector::Constant(n, -box), Vector::Constant(n, box), std::move(phis),
      Vector::Zero(n));
}

QpInstance generate_qp(int n, int m, std::uint64_t seed, double noise_std,
                       DiagonalSampling diagonal) {
  if (n % 2 != 0) {
    throw Error(ErrorCode::kOddDimension, "n must be even, p=n/2");
  }
  if (n < 4) {
    throw Error(ErrorCode::kInvalidArgument, "n must be at least 4");
  }
  return build_qp(n, m, seed, noise_std, diagonal);
}

QpInstance generate_small_qp(int n, int m, std::uint64_t seed,
                             double noise_std) {
  if (n % 2 != 0) {
    throw Error(ErrorCode::kOddDimension, "n must be even, p=n/2");
  }
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "n must be at least 2");
  }
  return build_qp(n, m, seed, noise_std, DiagonalSampling::kDiscreteUniform);
}

Vector qp_full_gradient(const QpInstance& qp, const Vector& x) {
  if (x.size() != qp.n) {
    throw Error(ErrorCode::kDimensionMismatch, "point has wrong dimension");
  }
  return -qp.delta * (qp.DB.transpose() * (qp.DB * x)) +
         qp.tau_obj * (qp.A.transpose() * (qp.A * x - qp.b));
}

Vector qp_stochastic_gradient(const QpInstance& qp, const Vector& x,
                              int batch, Rng& rng) {
  if (batch < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  }
  Vector mean_noise = Vector::Zero(qp.p);
  if (qp.noise_std > 0.0) {
    std::normal_distribution<double> normal(0.0, qp.noise_std);
    for (int j = 0; j < batch; ++j) {
      for (int i = 0; i < qp.p; ++i) mean_noise[i] += normal(rng);
    }
    mean_noise /= static_cast<double>(batch);
  }
  return qp_full_gradient(qp, x) -
         qp.tau_obj * (qp.A.transpose() * mean_noise);
}

QpGradientOracle::QpGradientOracle(std::shared_ptr<const QpInstance> instance)
    : instance_(std::move(instance)) {}

Vector QpGradientOracle::sample(const Vector& x, int batch, Rng& rng) const {
  return qp_stochastic_gradient(*instance_, x, batch, rng);
}

double QpGradientOracle::variance_bound() const {
  const double s = instance_->tau_obj * instance_->noise_std;
  return s * s * instance_->A.squaredNorm();
}

CompositeProblem make_qp_problem(std::shared_ptr<const QpInstance> instance) {
  SmoothObjective objective;
  objective.dim = instance->n;
  objective.value = [instance](const Vector& x) { return instance->value(x); };
  objective.gradient = [instance](const Vector& x) {
    return qp_full_gradient(*instance, x);
  };
  objective.lipschitz = instance->lipschitz;
  objective.weak_convexity = std::max(0.0, -instance->min_eigenvalue);
  auto set = instance->constraint_set();
  auto oracle = std::make_shared<const QpGradientOracle>(instance);
  return make_indicator_composite(std::move(objective), std::move(oracle),
                                  std::move(set));
}

void write_qp(const QpInstance& qp, std::ostream& out) {
  out << "ipag-qp-v1\n";
  out << "n " << qp.n << " m " << qp.m << " p " << qp.p << '\n';
  write_scalar(out, "delta", qp.delta);
  write_scalar(out, "tau_obj", qp.tau_obj);
  write_scalar(out, "noise_std", qp.noise_std);
  write_scalar(out, "box", qp.box);
  write_matrix(out, "A", qp.A);
  write_matrix(out, "B", qp.B);
  write_vector(out, "D", qp.D);
  write_vector(out, "b", qp.b);
  for (const auto& c : qp.constraints) {
    write_matrix(out, "Q", c.Q);
    write_vector(out, "d", c.d);
    write_scalar(out, "c", c.c);
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing qp archive");
}

QpInstance read_qp(std::istream& in) {
  ArchiveReader reader(in);
  reader.expect("ipag-qp-v1");
  QpInstance qp;
  reader.expect("n");
  qp.n = static_cast<int>(reader.integer());
  reader.expect("m");
  qp.m = static_cast<int>(reader.integer());
  reader.expect("p");
  qp.p = static_cast<int>(reader.integer());
  if (qp.n < 1 || qp.m < 0 || qp.p < 1) reader.fail("bad dimensions");
  qp.delta = reader.scalar("delta");
  qp.tau_obj = reader.scalar("tau_obj");
  qp.noise_std = reader.scalar("noise_std");
  qp.box = reader.scalar("box");
  qp.A = reader.matrix("A", qp.p, qp.n);
  qp.B = reader.matrix("B", qp.n, qp.n);
  qp.D = reader.vector("D", qp.n);
  qp.b = reader.vector("b", qp.p);
  for (int i = 0; i < qp.m; ++i) {
    QuadraticConstraintData c;
    c.Q = reader.matrix("Q", qp.n, qp.n);
    c.d = reader.vector("d", qp.n);
    c.c = reader.scalar("c");
    qp.constraints.push_back(std::move(c));
  }
  finalize_qp(qp);
  return qp;
}

namespace {

AnalyticProblem make_convex_box(double noise_std) {
  const Vector h = (Vector(4) << 1.0, 2.0, 4.0, 8.0).finished();
  const Vector c = (Vector(4) << 1.0, -2.0, 0.5, 3.0).finished();
  SmoothObjective f;
  f.dim = 4;
  f.value = [h, c](const Vector& x) {
    return 0.5 * (x - c).dot(h.asDiagonal() * (x - c));
  };
  f.gradient = [h, c](const Vector& x) -> Vector {
    return h.asDiagonal() * (x - c);
  };
  f.lipschitz = 8.0;
  f.weak_convexity = 0.0;
  auto oracle = std::make_shared<const AdditiveNoiseOracle>(f.gradient, 4,
                                                            noise_std);
  auto set = std::make_shared<const ConstraintSet>(
      Vector::Constant(4, -10.0), Vector::Constant(4, 10.0),
      std::vector<ConvexConstraint>{}, Vector::Zero(4));
  AnalyticProblem out;
  out.name = "convex_box";
  out.problem = make_indicator_composite(std::move(f), std::move(oracle),
                                         std::move(set));
  out.stationary_points = {c};
  out.convex = true;
  return out;
}

AnalyticProblem make_ball_projection(double noise_std) {
  const double weight = 2.0;
  const double radius = 5.0;
  const Vector c = (Vector(3) << 3.0, 4.0, 12.0).finished();
  SmoothObjective f;
  f.dim = 3;
  f.value = [c, weight](const Vector& x) {
    return 0.5 * weight * (x - c).squaredNorm();
  };
  f.gradient = [c, weight](const Vector& x) -> Vector {
    return weight * (x - c);
  };
  f.lipschitz = weight;
  f.weak_convexity = 0.0;
  auto oracle = std::make_shared<const AdditiveNoiseOracle>(f.gradient, 3,
                                                            noise_std);
  auto set = std::make_shared<const ConstraintSet>(
      Vector::Constant(3, -10.0), Vector::Constant(3, 10.0),
      std::vector<ConvexConstraint>{ConvexConstraint::ball(radius)},
      Vector::Zero(3));
  AnalyticProblem out;
  out.name = "ball_projection";
  out.problem = make_indicator_composite(std::move(f), std::move(oracle),
                                         std::move(set));
  // Isotropic objective: the constrained minimiser is the radial projection.
  out.stationary_points = {(radius / c.norm()) * c};
  out.convex = true;
  return out;
}

/// Per-coordinate KKT cases of a separable quadratic over a box.
std::vector<Vector> separable_box_stationary_points(const Vector& h,
                                                    const Vector& g,
                                                    double lower,
                                                    double upper) {
  std::vector<std::vector<double>> per_coord;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    std::vector<double> options;
    if (h[i] != 0.0) {
      const double root = -g[i] / h[i];
      if (root > lower && root < upper) options.push_back(root);
    }
    if (h[i] * lower + g[i] >= 0.0) options.push_back(lower);
    if (h[i] * upper + g[i] <= 0.0) options.push_back(upper);
    per_coord.push_back(std::move(options));
  }
  std::vector<Vector> points{Vector(0)};
  for (const auto& options : per_coord) {
    std::vector<Vector> next;
    for (const auto& prefix : points) {
      for (double v : options) {
        Vector p(prefix.size() + 1);
        p << prefix, v;
        next.push_back(std::move(p));
      }
    }
    points = std::move(next);
  }
  return points;
}

AnalyticProblem make_nonconvex_box(double noise_std) {
  const Vector h = (Vector(2) << 1.0, -2.0).finished();
  const Vector g = (Vector(2) << 0.5, 0.3).finished();
  SmoothObjective f;
  f.dim = 2;
  f.value = [h, g](const Vector& x) {
    return 0.5 * x.dot(h.asDiagonal() * x) + g.dot(x);
  };
  f.gradient = [h, g](const Vector& x) -> Vector {
    return h.asDiagonal() * x + g;
  };
  f.lipschitz = 2.0;
  f.weak_convexity = 2.0;
  auto oracle = std::make_shared<const AdditiveNoiseOracle>(f.gradient, 2,
                                                            noise_std);
  auto set = std::make_shared<const ConstraintSet>(
      Vector::Constant(2, -1.0), Vector::Constant(2, 1.0),
      std::vector<ConvexConstraint>{}, Vector::Zero(2));
  AnalyticProblem out;
  out.name = "nonconvex_box";
  out.problem = make_indicator_composite(std::move(f), std::move(oracle),
                                         std::move(set));
  out.stationary_points = separable_box_stationary_points(h, g, -1.0, 1.0);
  out.convex = false;
  return out;
}

}  // namespace

std::vector<AnalyticProblem> analytic_battery(double noise_std) {
  std::vector<AnalyticProblem> out;
  out.push_back(make_convex_box(noise_std));
  out.push_back(make_ball_projection(noise_std));
  out.push_back(make_nonconvex_box(noise_std));
  return out;
}

AnalyticProblem battery_problem(std::string_view name, double noise_std) {
  if (name == "convex_box") return make_convex_box(noise_std);
  if (name == "ball_projection") return make_ball_projection(noise_std);
  if (name == "nonconvex_box") return make_nonconvex_box(noise_std);
  throw Error(ErrorCode::kInvalidArgument,
              "unknown battery problem '" + std::string(name) + "'");
}

const ConstraintSet& ProjectionInstance::constraint_set() const {
  return *std::get<IndicatorOfSet>(nonsmooth).set;
}

std::vector<ProjectionInstance> projection_battery(int count,
                                                   std::uint64_t seed) {
  constexpr double kHalfWidth = 20.0;
  Rng rng(seed);
  std::uniform_int_distribution<int> dims(2, 20);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto random_direction = [&](int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    return Vector(v.normalized());
  };

  std::vector<ProjectionInstance> out;
  for (int k = 0; k < count; ++k) {
    const int n = dims(rng);
    const bool interior = (k % 5 == 4);
    ProjectionInstance inst;
    inst.gamma = std::pow(10.0, -1.0 + 2.0 * unit(rng));
    inst.initial = Vector(n);
    for (int i = 0; i < n; ++i) inst.initial[i] = -5.0 + 10.0 * unit(rng);

    std::vector<ConvexConstraint> phis;
    Vector slater;
    if (k % 2 == 0) {
      inst.kind = "halfspace";
      const Vector a = (0.5 + 1.5 * unit(rng)) * random_direction(n);
      const double offset = 0.5 + 1.5 * unit(rng);
      const Vector on_plane = a * (offset / a.squaredNorm());
      const double shift = (interior ? -1.0 : 1.0) * (0.5 + 4.5 * unit(rng));
      inst.center = on_plane + shift * a.normalized() +
                    2.0 * (Matrix::Identity(n, n) -
                           a * a.transpose() / a.squaredNorm()) *
                        random_direction(n);
      const double excess = std::max(0.0, a.dot(inst.center) - offset);
      inst.solution = inst.center - (excess / a.squaredNorm()) * a;
      slater = a * ((offset - 1.0) / a.squaredNorm());
      phis.push_back(ConvexConstraint::halfspace(a, offset));
    } else {
      inst.kind = "ball";
      const double radius = 1.0 + 2.0 * unit(rng);
      const double scale = interior ? 0.2 + 0.7 * unit(rng)
                                    : 1.2 + 2.8 * unit(rng);
      inst.center = radius * scale * random_direction(n);
      inst.solution = inst.center.norm() <= radius
                          ? inst.center
                          : Vector((radius / inst.center.norm()) * inst.center);
      slater = Vector::Zero(n);
      phis.push_back(ConvexConstraint::ball(radius));
    }
    inst.nonsmooth = IndicatorOfSet{std::make_shared<const ConstraintSet>(
        Vector::Constant(n, -kHalfWidth), Vector::Constant(n, kHalfWidth),
        std::move(phis), std::move(slater))};
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace ipag
