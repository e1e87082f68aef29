#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "svasu/datamodel.hpp"

namespace svasu {

/// Column-vector RMSE convention: sqrt((1/n) sum_j |x_j - xhat_j|^2) with n
/// the number of columns. Band count is not divided out; see
/// rmse_per_entry for the normalized variant.
inline double rmse(const Matrix& x, const Matrix& xhat) {
  require_dims(x.rows() == xhat.rows() && x.cols() == xhat.cols(),
               "rmse: shape mismatch");
  return (x - xhat).norm() / std::sqrt(static_cast<double>(x.cols()));
}

inline double rmse_per_entry(const Matrix& x, const Matrix& xhat) {
  require_dims(x.rows() == xhat.rows() && x.cols() == xhat.cols(),
               "rmse_per_entry: shape mismatch");
  return (x - xhat).norm() / std::sqrt(static_cast<double>(x.size()));
}

/// Exact reconstruction reports this sentinel instead of +inf.
inline constexpr double kSreCapDb = 300.0;

/// Signal-to-reconstruction-error, dB. Truth goes first; not symmetric.
inline double sre_db(const Matrix& x, const Matrix& xhat) {
  require_dims(x.rows() == xhat.rows() && x.cols() == xhat.cols(),
               "sre_db: shape mismatch");
  const double signal = x.squaredNorm();
  require(signal > 0.0, "sre_db: zero signal");
  const double err = (x - xhat).squaredNorm();
  if (err == 0.0) return kSreCapDb;
  return std::min(10.0 * std::log10(signal / err), kSreCapDb);
}

/// Sum estimated abundance rows within each material class, collapsing an
/// m-row in-situ estimate onto its p classes.
inline Matrix aggregate_rows_by_class(const Matrix& est,
                                      const std::vector<ClassRange>& offsets) {
  require(!offsets.empty(), "aggregate_rows_by_class: empty class offsets");
  require_dims(offsets.back().second == est.rows(),
               "aggregate_rows_by_class: offsets do not cover estimate rows");
  Matrix out(static_cast<long>(offsets.size()), est.cols());
  for (std::size_t c = 0; c < offsets.size(); ++c)
    out.row(static_cast<long>(c)) =
        est.middleRows(offsets[c].first, offsets[c].second - offsets[c].first)
            .colwise()
            .sum();
  return out;
}

/// Greedy max-correlation row matching; perm[i] = estimate row assigned to
/// truth row i.
inline std::vector<int> align_rows(const Matrix& truth, const Matrix& est) {
  require_dims(truth.rows() == est.rows() && truth.cols() == est.cols(),
               "align_rows: shape mismatch");
  const long p = truth.rows();
  Matrix corr(p, p);
  for (long i = 0; i < p; ++i)
    for (long j = 0; j < p; ++j) {
      const double denom = truth.row(i).norm() * est.row(j).norm();
      corr(i, j) = denom > 0.0 ? truth.row(i).dot(est.row(j)) / denom : 0.0;
    }
  std::vector<int> perm(p, -1);
  std::vector<bool> truth_used(p, false), est_used(p, false);
  for (long t = 0; t < p; ++t) {
    long bi = -1, bj = -1;
    double best = -2.0;
    for (long i = 0; i < p; ++i) {
      if (truth_used[i]) continue;
      for (long j = 0; j < p; ++j)
        if (!est_used[j] && corr(i, j) > best) {
          best = corr(i, j);
          bi = i;
          bj = j;
        }
    }
    perm[bi] = static_cast<int>(bj);
    truth_used[bi] = est_used[bj] = true;
  }
  return perm;
}

struct EvalReport {
  // Abundance metrics (present only when truth is supplied).
  std::optional<double> rmse_a;
  std::optional<double> rmse_a_per_entry;
  std::optional<double> sre_a_db;
  std::vector<double> per_endmember_rmse;
  // Pixel reconstruction, first order (M*A) and second order (M*A + V*B).
  double rmse_r_first = 0.0;
  double rmse_r_first_per_entry = 0.0;
  double sre_r_first_db = 0.0;
  std::optional<double> rmse_r_second;
  std::optional<double> rmse_r_second_per_entry;
  std::optional<double> sre_r_second_db;
  std::optional<double> residual_ratio_second_to_first;
  std::string config_hash;

  nlohmann::json to_json() const {
    nlohmann::json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
      if (v) j[key] = *v;
    };
    put("rmse_a", rmse_a);
    put("rmse_a_per_entry", rmse_a_per_entry);
    put("sre_a_db", sre_a_db);
    if (!per_endmember_rmse.empty()) j["per_endmember_rmse"] = per_endmember_rmse;
    j["rmse_r_first"] = rmse_r_first;
    j["rmse_r_first_per_entry"] = rmse_r_first_per_entry;
    j["sre_r_first_db"] = sre_r_first_db;
    put("rmse_r_second", rmse_r_second);
    put("rmse_r_second_per_entry", rmse_r_second_per_entry);
    put("sre_r_second_db", sre_r_second_db);
    put("residual_ratio_second_to_first", residual_ratio_second_to_first);
    j["config_hash"] = config_hash;
    return j;
  }
};

/// Score one run. truth_a may be null (real data); est_b/v may be null
/// (first-order only). When class offsets are supplied and the estimate has
/// more rows than the truth, rows are class-aggregated before greedy
/// alignment.
inline EvalReport evaluate_run(const Matrix* truth_a, const Matrix& est_a,
                               const Matrix& cube, const Matrix& m_lib,
                               const Matrix* v_lib, const Matrix* est_b,
                               const std::vector<ClassRange>& offsets = {}) {
  require_dims(m_lib.cols() == est_a.rows(),
               "evaluate_run: library columns != abundance rows");
  require_dims(m_lib.rows() == cube.rows() && est_a.cols() == cube.cols(),
               "evaluate_run: cube shape mismatch");
  EvalReport rep;

  const Matrix first = m_lib * est_a;
  rep.rmse_r_first = rmse(cube, first);
  rep.rmse_r_first_per_entry = rmse_per_entry(cube, first);
  rep.sre_r_first_db = sre_db(cube, first);

  if (v_lib && est_b && v_lib->cols() > 0) {
    require_dims(v_lib->cols() == est_b->rows() && v_lib->rows() == cube.rows(),
                 "evaluate_run: variability library/coefficients mismatch");
    const Matrix second = first + *v_lib * *est_b;
    rep.rmse_r_second = rmse(cube, second);
    rep.rmse_r_second_per_entry = rmse_per_entry(cube, second);
    rep.sre_r_second_db = sre_db(cube, second);
    const double first_norm = (cube - first).norm();
    rep.residual_ratio_second_to_first =
        first_norm > 0.0 ? (cube - second).norm() / first_norm : 0.0;
  }

  if (truth_a) {
    Matrix est = est_a;
    if (est.rows() != truth_a->rows()) {
      require_dims(!offsets.empty() &&
                       static_cast<long>(offsets.size()) == truth_a->rows(),
                   "evaluate_run: abundance row mismatch and no usable class "
                   "offsets");
      est = aggregate_rows_by_class(est, offsets);
    }
    require_dims(est.cols() == truth_a->cols(), "evaluate_run: pixel-count mismatch");
    const auto perm = align_rows(*truth_a, est);
    Matrix aligned(est.rows(), est.cols());
    for (long i = 0; i < est.rows(); ++i) aligned.row(i) = est.row(perm[i]);
    rep.rmse_a = rmse(*truth_a, aligned);
    rep.rmse_a_per_entry = rmse_per_entry(*truth_a, aligned);
    rep.sre_a_db = sre_db(*truth_a, aligned);
    for (long i = 0; i < est.rows(); ++i)
      rep.per_endmember_rmse.push_back(
          (truth_a->row(i) - aligned.row(i)).norm() /
          std::sqrt(static_cast<double>(est.cols())));
  }
  return rep;
}

}  // namespace svasu
