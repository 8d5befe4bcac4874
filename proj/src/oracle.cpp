#include "threshtest/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "threshtest/errors.hpp"

namespace threshtest::oracle {

namespace {

constexpr Index kMaxRows = 100;
constexpr Index kMaxCols = 12;

RowPartition default_partition(Index r, int j) {
  RowPartition out;
  if (j == 1) {
    for (Index i = 0; i < r; ++i) out.push_back({i});
  } else {
    std::vector<Index> all;
    for (Index i = 0; i < r; ++i) all.push_back(i);
    out.push_back(all);
  }
  return out;
}

double penalty(const Vector& w, const RowPartition& part, int j) {
  double s = 0.0;
  for (const auto& block : part) {
    double b = 0.0;
    for (Index i : block) b += j == 1 ? std::abs(w(i)) : w(i) * w(i);
    s += j == 1 ? b : std::sqrt(b);
  }
  return s;
}

// Proximal map of t * sum_l ||w_{H_l}||_j.
void prox(Vector& w, const RowPartition& part, int j, double t) {
  for (const auto& block : part) {
    if (j == 1) {
      for (Index i : block) {
        const double v = w(i);
        w(i) = v > t ? v - t : (v < -t ? v + t : 0.0);
      }
    } else {
      double norm = 0.0;
      for (Index i : block) norm += w(i) * w(i);
      norm = std::sqrt(norm);
      const double scale = norm > t ? 1.0 - t / norm : 0.0;
      for (Index i : block) w(i) *= scale;
    }
  }
}

struct Coordinates {
  Matrix lift;  // B = A^T (A A^T)^{-1}
  Matrix kernel;
};

Coordinates make_coordinates(const Matrix& a) {
  Coordinates co;
  const Matrix gram = a * a.transpose();
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorKind::RankDeficient, "A A^T is not positive definite");
  }
  co.lift = a.transpose() * ldlt.solve(Matrix::Identity(a.rows(), a.rows()));
  Eigen::FullPivLU<Matrix> lu(a);
  if (lu.rank() < a.rows()) throw Error(ErrorKind::RankDeficient, "A lacks full row rank");
  const Matrix ker = lu.kernel();
  if (lu.rank() == a.cols()) {
    co.kernel = Matrix(a.cols(), 0);
  } else {
    Eigen::HouseholderQR<Matrix> qr(ker);
    co.kernel = qr.householderQ() * Matrix::Identity(a.cols(), ker.cols());
  }
  return co;
}

double kkt_violation(const Matrix& x, const Vector& y, const Matrix& a, const Vector& c,
                     const Vector& beta, double lambda, int j, const RowPartition& part) {
  const Vector g = x.transpose() * (y - x * beta);
  const Vector z = (a * a.transpose()).ldlt().solve(a * g);
  double viol = (g - a.transpose() * z).cwiseAbs().maxCoeff();
  if (lambda <= 0.0) return std::max(viol, z.size() ? z.cwiseAbs().maxCoeff() : 0.0);
  const Vector gap = a * beta - c;
  const Vector s = z / lambda;
  for (const auto& block : part) {
    if (j == 1) {
      for (Index i : block) {
        const double want = gap(i) > kActiveThreshold ? 1.0 : (gap(i) < -kActiveThreshold ? -1.0 : 0.0);
        viol = std::max(viol, lambda * (want != 0.0 ? std::abs(s(i) - want)
                                                    : std::max(0.0, std::abs(s(i)) - 1.0)));
      }
    } else {
      double gn = 0.0, sn = 0.0;
      for (Index i : block) {
        gn += gap(i) * gap(i);
        sn += s(i) * s(i);
      }
      gn = std::sqrt(gn);
      sn = std::sqrt(sn);
      if (gn > kActiveThreshold) {
        double d = 0.0;
        for (Index i : block) d += std::pow(s(i) - gap(i) / gn, 2);
        viol = std::max(viol, lambda * std::sqrt(d));
      } else {
        viol = std::max(viol, lambda * std::max(0.0, sn - 1.0));
      }
    }
  }
  return viol;
}

// Exact zero from the prox. An absolute gap cutoff misplaces lambda0 when
// A beta-hat - c shrinks slowly near the threshold.
bool extinct(const SolveReport& rep) { return (rep.offset.array() == 0.0).all(); }

}  // namespace

SolveReport solve_affine_lasso(const Matrix& x, const Vector& y, const Matrix& a, const Vector& c,
                               double lambda, int j, const std::optional<RowPartition>& partition,
                               const SolverOptions& opts, const std::optional<Vector>& warm_start) {
  if (j != 1 && j != 2) throw Error(ErrorKind::InvalidSpec, "j must be 1 or 2");
  if (x.rows() != y.size() || a.cols() != x.cols() || a.rows() != c.size()) {
    throw Error(ErrorKind::DimensionMismatch, "oracle inputs have inconsistent shapes");
  }
  if (x.rows() > kMaxRows || x.cols() > kMaxCols) {
    throw Error(ErrorKind::UnsupportedScale, "oracle solver is limited to N <= 100, P <= 12");
  }
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidSpec, "lambda must be nonnegative");
  const RowPartition part = partition ? *partition : default_partition(a.rows(), j);
  validate_partition(part, a.rows());

  const Coordinates co = make_coordinates(a);
  const Index r = a.rows();
  const Index k = co.kernel.cols();
  Matrix z(x.rows(), r + k);
  z.leftCols(r) = x * co.lift;
  z.rightCols(k) = x * co.kernel;
  const Vector b = y - x * (co.lift * c);
  const Matrix zt_z = z.transpose() * z;
  const Vector zt_b = z.transpose() * b;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(zt_z, Eigen::EigenvaluesOnly);
  const double lip = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
  const double step = 1.0 / lip;

  Vector u = Vector::Zero(r + k);
  if (warm_start) {
    // Map beta back to (w, v): w = A beta - c, v = K^T beta.
    u.head(r) = a * (*warm_start) - c;
    if (k) u.tail(k) = co.kernel.transpose() * (*warm_start);
  }
  auto objective_of = [&](const Vector& uu) {
    const Vector res = b - z * uu;
    return 0.5 * res.squaredNorm() + lambda * penalty(uu.head(r), part, j);
  };

  Vector u_prev = u;
  Vector momentum = u;
  double t = 1.0;
  double f_prev = objective_of(u);
  std::size_t it = 0;
  std::size_t calm = 0;
  bool converged = false;
  bool restarted = false;
  for (; it < opts.max_iter; ++it) {
    Vector next = momentum - step * (zt_z * momentum - zt_b);
    Vector w = next.head(r);
    prox(w, part, j, step * lambda);
    next.head(r) = w;
    const double f_next = objective_of(next);
    // Adaptive restart keeps the iteration monotone.
    if (f_next > f_prev && !restarted) {
      t = 1.0;
      momentum = u;
      restarted = true;
      continue;
    }
    restarted = false;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    momentum = next + ((t - 1.0) / t_next) * (next - u);
    u_prev = u;
    u = std::move(next);
    t = t_next;
    f_prev = f_next;
    const double delta = (u - u_prev).cwiseAbs().maxCoeff();
    calm = delta <= opts.tol * std::max(1.0, u.cwiseAbs().maxCoeff()) ? calm + 1 : 0;
    if (calm >= 5) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorKind::NoConvergence,
                "affine lasso oracle did not converge in " + std::to_string(opts.max_iter) +
                    " iterations");
  }
  SolveReport rep;
  rep.beta_hat = co.lift * (c + u.head(r)) + co.kernel * u.tail(k);
  rep.objective = f_prev;
  rep.iterations = it + 1;
  rep.offset = u.head(r);
  rep.kkt_residual = kkt_violation(x, y, a, c, rep.beta_hat, lambda, j, part);
  return rep;
}

ZeroThresholdReport oracle_zero_threshold_report(const Matrix& x, const Vector& y,
                                                 const Matrix& a, const Vector& c, int j,
                                                 const std::optional<RowPartition>& partition,
                                                 double tol) {
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidSpec, "tolerance must be positive");
  ZeroThresholdReport out;
  SolveReport at_zero = solve_affine_lasso(x, y, a, c, 0.0, j, partition);
  if (extinct(at_zero)) {
    out.above = at_zero;
    out.below = at_zero;
    return out;
  }
  double lo = 0.0;
  double hi = std::max(1.0, (x.transpose() * (y - x * at_zero.beta_hat)).norm());
  SolveReport lo_rep = at_zero;
  SolveReport hi_rep = solve_affine_lasso(x, y, a, c, hi, j, partition);
  int doublings = 0;
  while (!extinct(hi_rep)) {
    if (++doublings > 200) throw Error(ErrorKind::NoConvergence, "no extinct lambda found");
    lo = hi;
    lo_rep = hi_rep;
    hi *= 2.0;
    hi_rep = solve_affine_lasso(x, y, a, c, hi, j, partition, {}, lo_rep.beta_hat);
  }
  for (int iter = 0; hi - lo >= tol; ++iter) {
    if (iter > 400) throw Error(ErrorKind::NoConvergence, "bisection did not narrow");
    const double mid = 0.5 * (lo + hi);
    SolveReport rep = solve_affine_lasso(x, y, a, c, mid, j, partition, {}, lo_rep.beta_hat);
    if (extinct(rep)) {
      hi = mid;
      hi_rep = std::move(rep);
    } else {
      lo = mid;
      lo_rep = std::move(rep);
    }
  }
  out.lambda0 = 0.5 * (lo + hi);
  out.lambda_below = lo;
  out.lambda_above = hi;
  out.below = std::move(lo_rep);
  out.above = std::move(hi_rep);
  return out;
}

double oracle_zero_threshold(const Matrix& x, const Vector& y, const Matrix& a, const Vector& c,
                             int j, const std::optional<RowPartition>& partition, double tol) {
  return oracle_zero_threshold_report(x, y, a, c, j, partition, tol).lambda0;
}

ConstrainedFit constrained_ls(const Matrix& x, const Vector& y, const Matrix& a, const Vector& c) {
  if (x.rows() != y.size() || a.cols() != x.cols() || a.rows() != c.size()) {
    throw Error(ErrorKind::DimensionMismatch, "constrained_ls inputs have inconsistent shapes");
  }
  const Index p = x.cols();
  const Index r = a.rows();
  Matrix block = Matrix::Zero(p + r, p + r);
  block.topLeftCorner(p, p) = x.transpose() * x;
  block.topRightCorner(p, r) = a.transpose();
  block.bottomLeftCorner(r, p) = a;
  Vector rhs(p + r);
  rhs.head(p) = x.transpose() * y;
  rhs.tail(r) = c;
  Eigen::FullPivLU<Matrix> lu(block);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::SingularSystem, "KKT block system is singular (rank " +
                                               std::to_string(lu.rank()) + " < " +
                                               std::to_string(p + r) + ")");
  }
  const Vector sol = lu.solve(rhs);
  return {sol.head(p), sol.tail(r)};
}

}  // namespace threshtest::oracle
