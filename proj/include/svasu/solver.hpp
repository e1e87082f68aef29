#pragma once

#include <chrono>
#include <random>
#include <vector>

#include <Eigen/Cholesky>

#include "svasu/datamodel.hpp"

namespace svasu {

inline double l21_norm(const Matrix& A) {
  double s = 0.0;
  for (long i = 0; i < A.rows(); ++i) s += A.row(i).norm();
  return s;
}

inline double l11_norm(const Matrix& A) { return A.cwiseAbs().sum(); }

inline long l0_count(const Matrix& A, double tol) {
  long c = 0;
  for (long j = 0; j < A.cols(); ++j)
    for (long i = 0; i < A.rows(); ++i)
      if (std::abs(A(i, j)) > tol) ++c;
  return c;
}

/// Row-reweighting diagonal: D_ii = 1 / (2 sqrt(|a^i|^2 + eps)).
inline Vector update_reweight(const Matrix& A, double epsilon) {
  require(epsilon > 0.0, "update_reweight: epsilon <= 0");
  Vector d(A.rows());
  for (long i = 0; i < A.rows(); ++i)
    d[i] = 1.0 / (2.0 * std::sqrt(A.row(i).squaredNorm() + epsilon));
  return d;
}

/// Relaxed objective with an explicitly supplied (frozen) reweighting
/// diagonal:
///   |R-MA|_F^2 + alpha |R-MA-VB|_F^2 + beta Tr(A^T D A) + gamma |B|_F^2.
inline double svasu_objective_frozen(const Matrix& R, const Matrix& M,
                                     const Matrix& V, const Matrix& A,
                                     const Matrix& B, double alpha, double beta,
                                     double gamma, const Vector& d_diag) {
  require_dims(M.cols() == A.rows() && M.rows() == R.rows() && A.cols() == R.cols(),
               "svasu_objective: R/M/A dimension mismatch");
  require_dims(V.cols() == B.rows() && (V.cols() == 0 || V.rows() == R.rows()),
               "svasu_objective: V/B dimension mismatch");
  require_dims(B.cols() == 0 || B.cols() == R.cols(),
               "svasu_objective: B pixel-count mismatch");
  require_dims(d_diag.size() == A.rows(), "svasu_objective: D size mismatch");
  Matrix first = R - M * A;
  Matrix second = B.size() > 0 ? Matrix(first - V * B) : first;
  double obj = first.squaredNorm() + alpha * second.squaredNorm();
  for (long i = 0; i < A.rows(); ++i)
    obj += beta * d_diag[i] * A.row(i).squaredNorm();
  obj += gamma * B.squaredNorm();
  return obj;
}

/// Relaxed objective with D computed from the current A.
inline double svasu_objective(const Matrix& R, const Matrix& M, const Matrix& V,
                              const Matrix& A, const Matrix& B, double alpha,
                              double beta, double gamma, double epsilon) {
  return svasu_objective_frozen(R, M, V, A, B, alpha, beta, gamma,
                                update_reweight(A, epsilon));
}

/// Unrelaxed objective: the l21 sparsity term instead of Tr(A^T D A).
inline double svasu_objective_unrelaxed(const Matrix& R, const Matrix& M,
                                        const Matrix& V, const Matrix& A,
                                        const Matrix& B, double alpha, double beta,
                                        double gamma) {
  Matrix first = R - M * A;
  Matrix second = B.size() > 0 ? Matrix(first - V * B) : first;
  return first.squaredNorm() + alpha * second.squaredNorm() + beta * l21_norm(A) +
         gamma * B.squaredNorm();
}

/// Smoothed-objective gradients: the relaxed l21 term uses D(A) from
/// update_reweight, which makes beta*Sum_i sqrt(|a^i|^2+eps) differentiable
/// with gradient 2*beta*D(A)*A.
inline Matrix svasu_grad_A(const Matrix& R, const Matrix& M, const Matrix& V,
                           const Matrix& A, const Matrix& B, double alpha,
                           double beta, double epsilon) {
  Vector d = update_reweight(A, epsilon);
  Matrix grad = 2.0 * ((1.0 + alpha) * (M.transpose() * (M * A)) -
                       (1.0 + alpha) * (M.transpose() * R));
  if (B.size() > 0) grad += 2.0 * alpha * (M.transpose() * (V * B));
  grad += 2.0 * beta * (d.asDiagonal() * A);
  return grad;
}

inline Matrix svasu_grad_B(const Matrix& R, const Matrix& M, const Matrix& V,
                           const Matrix& A, const Matrix& B, double alpha,
                           double gamma) {
  return 2.0 * (alpha * (V.transpose() * (M * A)) - alpha * (V.transpose() * R) +
                alpha * (V.transpose() * (V * B)) + gamma * B);
}

namespace detail {

inline constexpr double kDenFloor = 1e-12;

/// Precomputed Gram blocks; every per-iteration quantity is expressible
/// through these without touching the b-sized dimension again.
struct SvasuWorkspace {
  Matrix MtM, MtR, MtV, VtV, VtR, VtM;
  Matrix VtVp, VtVn;  // entrywise positive/negative parts of VtV
  double RtR = 0.0;

  SvasuWorkspace(const Matrix& R, const Matrix& M, const Matrix& V) {
    MtM = M.transpose() * M;
    MtR = M.transpose() * R;
    RtR = R.squaredNorm();
    if (V.cols() > 0) {
      MtV = M.transpose() * V;
      VtV = V.transpose() * V;
      VtR = V.transpose() * R;
      VtM = MtV.transpose();
      VtVp = VtV.cwiseMax(0.0);
      VtVn = (-VtV).cwiseMax(0.0);
    }
  }

  double inner(const Matrix& x, const Matrix& y) const {
    return x.cwiseProduct(y).sum();
  }

  double fit_first(const Matrix& A) const {
    return RtR - 2.0 * inner(MtR, A) + inner(MtM * A, A);
  }

  double fit_second(const Matrix& A, const Matrix& B) const {
    if (B.size() == 0) return fit_first(A);
    return fit_first(A) - 2.0 * inner(VtR, B) + inner(VtV * B, B) +
           2.0 * inner(MtV * B, A);
  }

  /// Frozen-D objective via Gram identities; cancellation error is far below
  /// the 1e-9 monotonicity slack at the scales this solver runs at.
  double objective(const Matrix& A, const Matrix& B, double alpha, double beta,
                   double gamma, const Vector& d) const {
    double obj = fit_first(A) + alpha * fit_second(A, B);
    for (long i = 0; i < A.rows(); ++i) obj += beta * d[i] * A.row(i).squaredNorm();
    obj += gamma * B.squaredNorm();
    return obj;
  }
};

// Both half-steps are multiplicative rules with the signed linear/Gram terms
// split entrywise into positive and negative parts (the semi-NMF treatment):
// positive parts stay in the denominator, negative parts move to the
// numerator. When every split term is nonnegative — nonnegative M and V —
// this reduces to the plain clamped rule, and the quartic root of the step
// ratio keeps the objective non-increasing for either sign pattern because
// each entry moves monotonically toward the minimizer of a convex
// per-entry surrogate.

inline Matrix multiplicative_step_A(const Matrix& A, const Vector& d,
                                    const SvasuWorkspace& ws, const Matrix& B,
                                    double alpha, double beta) {
  Matrix lin = (1.0 + alpha) * ws.MtR;
  if (B.size() > 0) lin -= alpha * (ws.MtV * B);  // signed when V is signed
  const Matrix num = lin.cwiseMax(0.0);
  Matrix den = (1.0 + alpha) * (ws.MtM * A) + beta * (d.asDiagonal() * A) +
               (-lin).cwiseMax(0.0);
  den.array() += kDenFloor;
  return A.cwiseProduct((num.cwiseQuotient(den)).array().pow(0.25).matrix());
}

inline Matrix multiplicative_step_B(const Matrix& B, const Matrix& A,
                                    const SvasuWorkspace& ws, double alpha,
                                    double gamma) {
  const Matrix lin = alpha * (ws.VtR - ws.VtM * A);
  const Matrix num = lin.cwiseMax(0.0) + alpha * (ws.VtVn * B);
  Matrix den = alpha * (ws.VtVp * B) + gamma * B + (-lin).cwiseMax(0.0);
  den.array() += kDenFloor;
  return B.cwiseProduct((num.cwiseQuotient(den)).array().pow(0.25).matrix());
}

}  // namespace detail

/// Single A half-step of the multiplicative rule (clamped numerator,
/// floored denominator), exposed for unit-level checks.
inline AbundanceMatrix update_A(const Matrix& A, const Vector& d_diag,
                                const Matrix& R, const Matrix& M, const Matrix& V,
                                const Matrix& B, double alpha, double beta) {
  detail::SvasuWorkspace ws(R, M, V);
  AbundanceMatrix out;
  out.values = detail::multiplicative_step_A(A, d_diag, ws, B, alpha, beta);
  if (!out.values.allFinite()) throw Error("update_A: non-finite result");
  return out;
}

/// Single B half-step; per Algorithm ordering A must already hold this
/// iteration's value.
inline VariabilityCoefficients update_B(const Matrix& B, const Matrix& A,
                                        const Matrix& R, const Matrix& M,
                                        const Matrix& V, double alpha, double gamma) {
  detail::SvasuWorkspace ws(R, M, V);
  VariabilityCoefficients out;
  out.values = detail::multiplicative_step_B(B, A, ws, alpha, gamma);
  if (!out.values.allFinite()) throw Error("update_B: non-finite result");
  return out;
}

struct SolverReport {
  int iterations = 0;
  bool converged = false;
  double wall_time_s = 0.0;
  std::vector<double> objective_trace;            // relaxed, D from current A
  std::vector<double> unrelaxed_objective_trace;  // l21 form, for reporting
};

struct SvasuResult {
  AbundanceMatrix A;
  VariabilityCoefficients B;
  SolverReport report;
};

struct SvasuSolveOptions {
  /// Verify per-half-step descent of the frozen-D objective each iteration
  /// (the quantity the auxiliary-function argument bounds); 1e-9 relative
  /// slack. Throws on violation.
  bool check_monotone = true;
};

/// Alternating multiplicative-update solver. A and B start uniform in (0,1];
/// each iteration updates A, then B, then the reweighting diagonal, until the
/// relative objective change drops below rel_tol or max_iters is hit.
inline SvasuResult svasu_solve(const HyperCube& R, const SpectralLibrary& M,
                               const SpectralLibrary& V, const SolverConfig& cfg,
                               const SvasuSolveOptions& opts = {}) {
  cfg.validate();
  require(M.signatures.size() == 0 || M.signatures.minCoeff() >= 0.0,
          "svasu_solve: endmember library must be nonnegative");
  require_dims(R.data.rows() == M.signatures.rows(),
               "svasu_solve: cube/library band mismatch");
  require_dims(V.signatures.cols() == 0 || V.signatures.rows() == R.data.rows(),
               "svasu_solve: variability library band mismatch");

  const auto t0 = std::chrono::steady_clock::now();
  const long m = M.signatures.cols();
  const long l = V.signatures.cols();
  const long n = R.data.cols();

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Strictly positive init: multiplicative updates cannot leave zero.
  auto draw = [&](long rows, long cols) {
    Matrix x(rows, cols);
    for (long j = 0; j < cols; ++j)
      for (long i = 0; i < rows; ++i) x(i, j) = 1.0 - unif(rng);
    return x;
  };
  Matrix A = draw(m, n);
  Matrix B = draw(l, n);

  detail::SvasuWorkspace ws(R.data, M.signatures, V.signatures);
  Vector d = update_reweight(A, cfg.epsilon);

  SvasuResult res;
  // Cached Gram fit terms: the two data-fit quantities are the expensive
  // pieces of the objective, and each half-step invalidates only one of them.
  auto row_sq = [](const Matrix& a) {
    Vector r(a.rows());
    for (long i = 0; i < a.rows(); ++i) r[i] = a.row(i).squaredNorm();
    return r;
  };
  double fit1 = ws.fit_first(A);
  double fit2 = ws.fit_second(A, B);
  // Roundoff floor for the descent checks: the Gram-form objective cancels
  // terms of size ~R^T R, so tiny objectives carry absolute noise at that
  // scale regardless of the 1e-9 relative slack.
  const double obj_noise = 1e-12 * (1.0 + ws.RtR);
  Vector a_row2 = row_sq(A);
  auto frozen = [&](double f1, double f2, const Vector& rr, const Vector& dd,
                    const Matrix& b) {
    return f1 + cfg.alpha * f2 + cfg.beta * dd.dot(rr) + cfg.gamma * b.squaredNorm();
  };
  auto record = [&]() {
    res.report.objective_trace.push_back(frozen(fit1, fit2, a_row2, d, B));
    res.report.unrelaxed_objective_trace.push_back(
        fit1 + cfg.alpha * fit2 + cfg.beta * l21_norm(A) +
        cfg.gamma * B.squaredNorm());
  };
  record();

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const double before_a = frozen(fit1, fit2, a_row2, d, B);
    Matrix A_next = detail::multiplicative_step_A(A, d, ws, B, cfg.alpha, cfg.beta);
    if (!A_next.allFinite())
      throw Error("svasu_solve: non-finite A at iteration " + std::to_string(iter));
    const double fit1_next = ws.fit_first(A_next);
    const double fit2_next = ws.fit_second(A_next, B);
    const Vector a_row2_next = row_sq(A_next);
    if (opts.check_monotone) {
      const double after_a = frozen(fit1_next, fit2_next, a_row2_next, d, B);
      if (after_a > before_a + 1e-9 * std::abs(before_a) + obj_noise)
        throw Error("svasu_solve: objective increased in A step at iteration " +
                    std::to_string(iter));
    }
    A = std::move(A_next);
    fit1 = fit1_next;
    fit2 = fit2_next;
    a_row2 = a_row2_next;

    if (l > 0) {
      const double before_b = frozen(fit1, fit2, a_row2, d, B);
      Matrix B_next = detail::multiplicative_step_B(B, A, ws, cfg.alpha, cfg.gamma);
      if (!B_next.allFinite())
        throw Error("svasu_solve: non-finite B at iteration " + std::to_string(iter));
      const double fit2_b = ws.fit_second(A, B_next);
      if (opts.check_monotone) {
        const double after_b = frozen(fit1, fit2_b, a_row2, d, B_next);
        if (after_b > before_b + 1e-9 * std::abs(before_b) + obj_noise)
          throw Error("svasu_solve: objective increased in B step at iteration " +
                      std::to_string(iter));
      }
      B = std::move(B_next);
      fit2 = fit2_b;
    }

    // Flush vanishing entries to exact zero; multiplicative decay otherwise
    // parks them in the denormal range, which is painfully slow on most FPUs.
    // The cached fit terms move by far less than double precision can resolve.
    A = (A.array() < 1e-200).select(0.0, A);
    if (l > 0) B = (B.array() < 1e-200).select(0.0, B);

    d = update_reweight(A, cfg.epsilon);
    record();
    res.report.iterations = iter + 1;

    const auto& trace = res.report.objective_trace;
    const double prev = trace[trace.size() - 2];
    const double cur = trace.back();
    if (std::abs(prev - cur) < cfg.rel_tol * std::abs(prev)) {
      res.report.converged = true;
      break;
    }
  }

  res.A.values = std::move(A);
  res.B.values = std::move(B);
  res.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct SunsalOptions {
  double mu = 1.0;  // ADMM penalty
  int max_iters = 5000;
  double tol = 1e-6;  // primal + dual residual
};

struct SunsalResult {
  AbundanceMatrix A;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;  // 0.5|R-MA|_F^2 + lambda |A|_1,1
};

/// ANC-constrained l2-l1 sparse unmixing by alternating direction: quadratic
/// step against a cached factorization of (M^T M + mu I), then joint
/// soft-threshold + nonnegativity projection, then dual ascent.
inline SunsalResult baseline_sunsal(const Matrix& R, const Matrix& M, double lambda,
                                    const SunsalOptions& opts = {}) {
  require(lambda >= 0.0, "baseline_sunsal: lambda < 0");
  require_dims(M.rows() == R.rows(), "baseline_sunsal: band mismatch");
  const long m = M.cols();
  const long n = R.cols();

  Matrix gram = M.transpose() * M;
  gram.diagonal().array() += opts.mu;
  Eigen::LDLT<Matrix> factor(gram);
  if (factor.info() != Eigen::Success)
    throw Error("baseline_sunsal: factorization failed");
  const Matrix MtR = M.transpose() * R;

  Matrix Z = Matrix::Zero(m, n);  // constrained copy
  Matrix U = Matrix::Zero(m, n);  // scaled dual

  SunsalResult res;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const Matrix A = factor.solve(MtR + opts.mu * (Z - U));
    const Matrix Z_prev = Z;
    Z = (A + U).array() - lambda / opts.mu;
    Z = Z.cwiseMax(0.0);
    U += A - Z;
    res.iterations = iter + 1;
    const double primal = (A - Z).norm();
    const double dual = opts.mu * (Z - Z_prev).norm();
    if (primal + dual < opts.tol) {
      res.converged = true;
      break;
    }
  }
  res.A.values = Z;
  res.objective = 0.5 * (R - M * Z).squaredNorm() + lambda * l11_norm(Z);
  return res;
}

}  // namespace svasu
