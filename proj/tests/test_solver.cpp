#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "svasu/solver.hpp"
#include "svasu/synthgen.hpp"

using namespace svasu;

namespace {

struct Instance {
  Matrix R, M, V, A, B;
};

Instance random_instance(long b, long m, long l, long n, std::mt19937_64& rng) {
  Instance in;
  in.M = oracle::random_matrix(b, m, rng, 0.05, 1.0);
  in.V = oracle::random_matrix(b, l, rng, 0.0, 0.4);
  in.A = oracle::random_matrix(m, n, rng, 0.01, 1.0);
  in.B = oracle::random_matrix(l, n, rng, 0.01, 0.5);
  in.R = oracle::random_matrix(b, n, rng, 0.05, 1.0);
  return in;
}

}  // namespace

TEST_CASE("norms: identity, zero, and the l21 <= l11 inequality") {
  const Matrix eye = Matrix::Identity(3, 3);
  CHECK(l21_norm(eye) == doctest::Approx(3.0));
  CHECK(l11_norm(eye) == doctest::Approx(3.0));
  CHECK(l0_count(eye, 1e-12) == 3);
  const Matrix zero = Matrix::Zero(4, 6);
  CHECK(l21_norm(zero) == 0.0);
  CHECK(l11_norm(zero) == 0.0);
  CHECK(l0_count(zero, 1e-12) == 0);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = oracle::random_matrix(6, 9, rng, -1.0, 1.0);
    CHECK(l21_norm(m) <= l11_norm(m) + 1e-12);
  }
}

TEST_CASE("update_reweight: closed-form cases") {
  Matrix a = Matrix::Zero(2, 4);
  a.row(1).setConstant(0.5);  // row norm^2 = 1
  Vector d = update_reweight(a, 1e-8);
  CHECK(d[0] == doctest::Approx(1.0 / (2.0 * 1e-4)));
  CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-6));

  Matrix b(1, 2);
  const double eps = 1e-3;
  b << std::sqrt((1.0 - eps) / 2.0), std::sqrt((1.0 - eps) / 2.0);
  CHECK(update_reweight(b, eps)[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(update_reweight(a, 0.0), InvalidArgument);
}

TEST_CASE("update_reweight bounds: D_ii in (0, 1/(2 sqrt(eps))]") {
  std::mt19937_64 rng(2);
  const double eps = 1e-8;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_matrix(8, 12, rng, 0.0, 2.0);
    const Vector d = update_reweight(a, eps);
    CHECK(d.minCoeff() > 0.0);
    CHECK(d.maxCoeff() <= 1.0 / (2.0 * std::sqrt(eps)) + 1e-12);
  }
}

TEST_CASE("svasu_objective: analytic values") {
  std::mt19937_64 rng(3);
  const Instance in = random_instance(10, 6, 4, 8, rng);
  const Matrix zero_a = Matrix::Zero(6, 8);
  const Matrix zero_b = Matrix::Zero(4, 8);
  const double alpha = 2.5;
  // A=0, B=0 with beta=0 -> (1+alpha)*|R|_F^2.
  CHECK(svasu_objective(in.R, in.M, in.V, zero_a, zero_b, alpha, 0.0, 1.0, 1e-8) ==
        doctest::Approx((1.0 + alpha) * in.R.squaredNorm()));
  // Exact fit, B=0, beta=gamma=0 -> 0.
  const Matrix r_exact = in.M * in.A;
  CHECK(svasu_objective(r_exact, in.M, in.V, in.A, zero_b, alpha, 0.0, 0.0, 1e-8) ==
        doctest::Approx(0.0));
}

TEST_CASE("svasu_objective: matches the term-by-term oracle to 1e-10 relative") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = random_instance(12, 7, 5, 9, rng);
    const double ours =
        svasu_objective(in.R, in.M, in.V, in.A, in.B, 1.7, 0.9, 2.3, 1e-8);
    const double ref = oracle::naive_svasu_objective(in.R, in.M, in.V, in.A, in.B,
                                                     1.7, 0.9, 2.3, 1e-8);
    CHECK(std::abs(ours - ref) <= 1e-10 * std::abs(ref));
  }
}

TEST_CASE("gram-based objective inside the solver matches the direct form") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = random_instance(15, 6, 4, 11, rng);
    const detail::SvasuWorkspace ws(in.R, in.M, in.V);
    const Vector d = update_reweight(in.A, 1e-8);
    const double gram = ws.objective(in.A, in.B, 1.3, 0.4, 5.0, d);
    const double direct =
        svasu_objective_frozen(in.R, in.M, in.V, in.A, in.B, 1.3, 0.4, 5.0, d);
    CHECK(std::abs(gram - direct) <= 1e-10 * std::abs(direct));
  }
}

TEST_CASE("smoothed-objective gradient matches central finite differences") {
  std::mt19937_64 rng(6);
  const Instance in = random_instance(10, 8, 4, 5, rng);
  const double alpha = 1.5, beta = 0.7, gamma = 2.0, eps = 1e-4;

  const Matrix ga = svasu_grad_A(in.R, in.M, in.V, in.A, in.B, alpha, beta, eps);
  const Matrix fa = oracle::finite_difference(
      [&](const Matrix& a) {
        return oracle::smoothed_objective(in.R, in.M, in.V, a, in.B, alpha, beta,
                                          gamma, eps);
      },
      in.A, 1e-6);
  CHECK((ga - fa).norm() <= 1e-5 * fa.norm());

  const Matrix gb = svasu_grad_B(in.R, in.M, in.V, in.A, in.B, alpha, gamma);
  const Matrix fb = oracle::finite_difference(
      [&](const Matrix& b) {
        return oracle::smoothed_objective(in.R, in.M, in.V, in.A, b, alpha, beta,
                                          gamma, eps);
      },
      in.B, 1e-6);
  CHECK((gb - fb).norm() <= 1e-5 * fb.norm());
}

TEST_CASE("update_A: stationary when numerator equals denominator") {
  // Engineer num == den by choosing R so that M^T R (1+alpha) equals the
  // denominator at A, with B = 0 and beta = 0.
  std::mt19937_64 rng(7);
  const long b = 6, m = 6, n = 4;
  const Matrix M = Matrix::Identity(b, m) + 0.1 * oracle::random_matrix(b, m, rng);
  const Matrix A = oracle::random_matrix(m, n, rng, 0.2, 1.0);
  const Matrix R = M * A;  // then M^T R = M^T M A exactly
  const Matrix V = Matrix::Zero(b, 0);
  const Matrix B = Matrix::Zero(0, n);
  const Vector d = update_reweight(A, 1e-8);
  const AbundanceMatrix next = update_A(A, d, R, M, V, B, 0.0, 0.0);
  CHECK((next.values - A).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("update_A: exact least-squares point with orthonormal M is fixed") {
  std::mt19937_64 rng(8);
  const long b = 10, m = 4, n = 6;
  // Nonnegative orthonormal columns: a subset of the standard basis.
  Matrix Mo = Matrix::Zero(b, m);
  for (long j = 0; j < m; ++j) Mo(j, j) = 1.0;
  const Matrix A = (Mo.transpose() *
                    oracle::random_matrix(b, n, rng, 0.1, 1.0)).cwiseMax(0.01);
  const Matrix R = Mo * A;
  const Matrix V = Matrix::Zero(b, 0);
  const Matrix B = Matrix::Zero(0, n);
  const Vector d = update_reweight(A, 1e-8);
  const AbundanceMatrix next = update_A(A, d, R, Mo, V, B, 0.0, 0.0);
  CHECK((next.values - A).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("update_A / update_B: frozen-D objective never increases") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    Instance in = random_instance(14, 8, 5, 12, rng);
    const double alpha = 1.2, beta = 0.8, gamma = 1.5;
    const Vector d = update_reweight(in.A, 1e-8);
    const double before = svasu_objective_frozen(in.R, in.M, in.V, in.A, in.B,
                                                 alpha, beta, gamma, d);
    const AbundanceMatrix a2 = update_A(in.A, d, in.R, in.M, in.V, in.B, alpha, beta);
    const double mid = svasu_objective_frozen(in.R, in.M, in.V, a2.values, in.B,
                                              alpha, beta, gamma, d);
    CHECK(mid <= before + 1e-9 * std::abs(before));
    const VariabilityCoefficients b2 =
        update_B(in.B, a2.values, in.R, in.M, in.V, alpha, gamma);
    const double after = svasu_objective_frozen(in.R, in.M, in.V, a2.values,
                                                b2.values, alpha, beta, gamma, d);
    CHECK(after <= mid + 1e-9 * std::abs(mid));
    CHECK(a2.values.minCoeff() >= 0.0);
    CHECK(b2.values.minCoeff() >= 0.0);
  }
}

TEST_CASE("update_B: gamma -> inf drives B to zero; alpha=0 zeroes in one step") {
  std::mt19937_64 rng(10);
  const Instance in = random_instance(10, 5, 4, 6, rng);
  const VariabilityCoefficients huge =
      update_B(in.B, in.A, in.R, in.M, in.V, 1.0, 1e18);
  CHECK(huge.values.maxCoeff() < 1e-4);
  const VariabilityCoefficients off = update_B(in.B, in.A, in.R, in.M, in.V, 0.0, 1.0);
  CHECK(off.values.maxCoeff() == 0.0);
}

TEST_CASE("svasu_solve: max_iters=0 returns the seeded initialization") {
  std::mt19937_64 rng(11);
  HyperCube cube;
  cube.height = 1;
  cube.width = 8;
  cube.data = oracle::random_matrix(12, 8, rng, 0.1, 1.0);
  SpectralLibrary M;
  M.signatures = oracle::random_matrix(12, 5, rng, 0.1, 1.0);
  M.kind = LibraryKind::endmember;
  SpectralLibrary V;
  V.kind = LibraryKind::variability;
  V.signatures = oracle::random_matrix(12, 3, rng, -0.2, 0.2);
  SolverConfig cfg;
  cfg.max_iters = 0;
  cfg.seed = 77;
  const SvasuResult r1 = svasu_solve(cube, M, V, cfg);
  CHECK_FALSE(r1.report.converged);
  CHECK(r1.report.iterations == 0);
  CHECK(r1.A.values.minCoeff() > 0.0);
  CHECK(r1.A.values.maxCoeff() <= 1.0);
  const SvasuResult r2 = svasu_solve(cube, M, V, cfg);
  CHECK(r1.A.values == r2.A.values);  // same seed, bitwise
  CHECK(r1.B.values == r2.B.values);
}

TEST_CASE("svasu_solve: deterministic objective trace for a fixed seed") {
  std::mt19937_64 rng(12);
  HyperCube cube;
  cube.height = 1;
  cube.width = 20;
  cube.data = oracle::random_matrix(15, 20, rng, 0.1, 1.0);
  SpectralLibrary M;
  M.signatures = oracle::random_matrix(15, 6, rng, 0.1, 1.0);
  M.kind = LibraryKind::endmember;
  SpectralLibrary V;
  V.kind = LibraryKind::variability;
  V.signatures = oracle::random_matrix(15, 4, rng, -0.2, 0.2);
  SolverConfig cfg;
  cfg.alpha = 1.0;
  cfg.beta = 0.1;
  cfg.gamma = 1.0;
  cfg.max_iters = 50;
  cfg.seed = 5;
  const SvasuResult r1 = svasu_solve(cube, M, V, cfg);
  const SvasuResult r2 = svasu_solve(cube, M, V, cfg);
  CHECK(r1.report.objective_trace == r2.report.objective_trace);
  // Relaxed trace is non-increasing along the run.
  for (std::size_t i = 1; i < r1.report.objective_trace.size(); ++i)
    CHECK(r1.report.objective_trace[i] <=
          r1.report.objective_trace[i - 1] +
              1e-9 * std::abs(r1.report.objective_trace[i - 1]));
}

TEST_CASE("svasu_solve: empty V degenerates to reweighted sparse unmixing") {
  std::mt19937_64 rng(13);
  SpectralLibrary M;
  M.signatures = oracle::random_matrix(20, 5, rng, 0.1, 1.0);
  M.kind = LibraryKind::endmember;
  AbundanceMatrix truth;
  truth.values = Matrix::Zero(5, 25);
  for (int j = 0; j < 25; ++j) truth.values(j % 5, j) = 1.0;
  HyperCube cube;
  cube.height = 5;
  cube.width = 5;
  cube.data = M.signatures * truth.values;
  SpectralLibrary V;
  V.kind = LibraryKind::variability;
  V.signatures.resize(20, 0);

  SolverConfig cfg;
  cfg.alpha = 1.0;
  cfg.beta = 1e-4;
  cfg.gamma = 1.0;
  cfg.max_iters = 20000;
  cfg.rel_tol = 1e-13;
  cfg.seed = 3;
  const SvasuResult res = svasu_solve(cube, M, V, cfg);
  CHECK(res.B.values.size() == 0);
  const double rmse_a = (res.A.values - truth.values).norm() / std::sqrt(25.0);
  CHECK(rmse_a < 1e-2);
}

TEST_CASE("svasu_solve: scaling R scales the unregularized residual by c^2") {
  std::mt19937_64 rng(14);
  HyperCube cube;
  cube.height = 1;
  cube.width = 10;
  cube.data = oracle::random_matrix(8, 10, rng, 0.1, 1.0);
  SpectralLibrary M;
  M.signatures = oracle::random_matrix(8, 4, rng, 0.1, 1.0);
  M.kind = LibraryKind::endmember;
  SpectralLibrary V;
  V.kind = LibraryKind::variability;
  V.signatures.resize(8, 0);
  SolverConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 0.0;
  cfg.gamma = 1.0;
  cfg.max_iters = 5000;
  cfg.rel_tol = 1e-12;
  cfg.seed = 9;
  const SvasuResult base = svasu_solve(cube, M, V, cfg);
  HyperCube scaled = cube;
  scaled.data *= 3.0;
  const SvasuResult big = svasu_solve(scaled, M, V, cfg);
  const double r1 = (cube.data - M.signatures * base.A.values).squaredNorm();
  const double r2 = (scaled.data - M.signatures * big.A.values).squaredNorm();
  CHECK(r2 == doctest::Approx(9.0 * r1).epsilon(1e-3));
}

TEST_CASE("baseline_sunsal: lambda=0 with invertible M reproduces M^-1 R") {
  std::mt19937_64 rng(15);
  const Matrix M =
      oracle::random_matrix(6, 6, rng, 0.1, 1.0) + 2.0 * Matrix::Identity(6, 6);
  const Matrix truth = oracle::random_matrix(6, 9, rng, 0.05, 1.0);
  const Matrix R = M * truth;
  const SunsalResult res = baseline_sunsal(R, M, 0.0);
  CHECK(res.converged);
  CHECK((R - M * res.A.values).norm() < 1e-6);
  CHECK(res.A.values.minCoeff() >= 0.0);
}

TEST_CASE("baseline_sunsal: very large lambda shrinks A to zero") {
  std::mt19937_64 rng(16);
  const Matrix M = oracle::random_matrix(10, 5, rng, 0.1, 1.0);
  const Matrix R = oracle::random_matrix(10, 7, rng, 0.1, 1.0);
  const SunsalResult res = baseline_sunsal(R, M, 1e6);
  CHECK(res.A.values.maxCoeff() == 0.0);
}

TEST_CASE("baseline_sunsal: objective within 1e-6 of the projected-gradient oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix M = oracle::random_matrix(20, 10, rng, 0.05, 1.0);
    const Matrix R = oracle::random_matrix(20, 15, rng, 0.05, 1.0);
    const double lambda = 0.05;
    SunsalOptions opts;
    opts.tol = 1e-9;
    opts.max_iters = 50000;
    const SunsalResult res = baseline_sunsal(R, M, lambda, opts);
    const Matrix ref = oracle::sunsal_projected_gradient(R, M, lambda);
    const double ref_obj = oracle::sunsal_objective(R, M, ref, lambda);
    CHECK(res.objective <= ref_obj + 1e-6);
  }
}
