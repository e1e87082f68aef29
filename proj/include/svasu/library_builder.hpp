#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "svasu/datamodel.hpp"

namespace svasu {

/// PCA of the library covariance: mean, eigenvectors by descending
/// eigenvalue, and the selected dominant-component count k.
struct PcaModel {
  Vector mean;     // per-band column mean
  Matrix eigvecs;  // b x r, orthonormal columns
  Vector eigvals;  // non-increasing, >= 0
  int k = 1;

  int rank() const { return static_cast<int>(eigvals.size()); }
};

/// Covariance eigendecomposition of a spectral library: C = (1/m) Xc Xc^T.
inline PcaModel pca_decompose(const SpectralLibrary& X) {
  const long m = X.signatures.cols();
  require(m >= 2, "pca_decompose: need at least 2 library columns");
  const long b = X.signatures.rows();

  PcaModel model;
  model.mean = X.signatures.rowwise().mean();
  Matrix centered = X.signatures.colwise() - model.mean;
  Matrix cov = (centered * centered.transpose()) / static_cast<double>(m);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error("pca_decompose: eigendecomposition failed");

  const long r = std::min(b, m);
  model.eigvals.resize(r);
  model.eigvecs.resize(b, r);
  // Eigen returns ascending order; keep the top r, descending.
  for (long i = 0; i < r; ++i) {
    model.eigvals[i] = std::max(solver.eigenvalues()[b - 1 - i], 0.0);
    model.eigvecs.col(i) = solver.eigenvectors().col(b - 1 - i);
  }
  return model;
}

/// Smallest k with cumulative eigenvalue fraction >= zeta.
inline int select_k(const Vector& eigvals, double zeta) {
  require(zeta > 0.0 && zeta <= 1.0, "select_k: zeta outside (0, 1]");
  require(eigvals.size() >= 1, "select_k: empty eigvals");
  const double total = eigvals.sum();
  require(total > 0.0, "select_k: all-zero eigvals");
  for (long i = 1; i < eigvals.size(); ++i)
    require(eigvals[i] <= eigvals[i - 1] && eigvals[i] >= 0.0,
            "select_k: eigvals not sorted nonnegative");
  double acc = 0.0;
  for (long k = 0; k < eigvals.size(); ++k) {
    acc += eigvals[k];
    if (acc / total >= zeta) return static_cast<int>(k) + 1;
  }
  return static_cast<int>(eigvals.size());
}

/// Dominant-subspace reconstruction Wk Wk^T Xc + mean, clamped nonnegative.
/// clamp_norm_ratio (when requested) reports |clamped part|_F / |recon|_F.
inline SpectralLibrary build_endmember_library(const SpectralLibrary& X,
                                               const PcaModel& model,
                                               double* clamp_norm_ratio = nullptr) {
  require(model.k >= 1 && model.k <= model.rank(), "build_endmember_library: k out of range");
  require_dims(model.eigvecs.rows() == X.signatures.rows(),
               "build_endmember_library: model band count mismatch");
  Matrix centered = X.signatures.colwise() - model.mean;
  const auto wk = model.eigvecs.leftCols(model.k);
  Matrix recon = wk * (wk.transpose() * centered);
  recon.colwise() += model.mean;
  Matrix clamped = recon.cwiseMax(0.0);
  if (clamp_norm_ratio) {
    const double denom = recon.norm();
    *clamp_norm_ratio = denom > 0.0 ? (recon - clamped).norm() / denom : 0.0;
  }
  SpectralLibrary out;
  out.signatures = std::move(clamped);
  out.class_offsets = X.class_offsets;
  out.kind = LibraryKind::endmember;
  return out;
}

/// Residual-subspace columns of the centered library (mean add-back
/// available via add_mean); near-duplicate columns within
/// 0.1 degree are dropped.
inline SpectralLibrary build_variability_library(const SpectralLibrary& X,
                                                 const PcaModel& model,
                                                 bool add_mean = false) {
  require(model.k >= 1 && model.k <= model.rank(), "build_variability_library: k out of range");
  require(model.k < model.rank(),
          "build_variability_library: k equals rank, no residual subspace");
  Matrix centered = X.signatures.colwise() - model.mean;
  const auto wk = model.eigvecs.leftCols(model.k);
  Matrix residual = centered - wk * (wk.transpose() * centered);

  const double dedup_angle = 0.1 * kDegree;
  std::vector<long> kept;
  for (long j = 0; j < residual.cols(); ++j) {
    if (residual.col(j).norm() < 1e-12) continue;
    bool duplicate = false;
    for (long i : kept)
      if (spectral_angle(residual.col(i), residual.col(j)) < dedup_angle) {
        duplicate = true;
        break;
      }
    if (!duplicate) kept.push_back(j);
  }
  require(!kept.empty(), "build_variability_library: all residual columns are null");

  SpectralLibrary out;
  out.kind = LibraryKind::variability;
  out.signatures.resize(X.signatures.rows(), static_cast<long>(kept.size()));
  for (std::size_t t = 0; t < kept.size(); ++t) {
    out.signatures.col(static_cast<long>(t)) = residual.col(kept[t]);
    if (add_mean) out.signatures.col(static_cast<long>(t)) += model.mean;
  }
  return out;
}

struct PurityConfig {
  int window_radius = 2;
  double homogeneity_threshold = 2.0 * kDegree;  // mean angle to window centroid
  int max_candidates_per_class = 5;
  double merge_angle = 5.0 * kDegree;

  void validate() const {
    require(window_radius >= 1, "PurityConfig: window_radius < 1");
    require(homogeneity_threshold >= 0.0, "PurityConfig: negative threshold");
    require(max_candidates_per_class >= 1, "PurityConfig: max_candidates_per_class < 1");
    require(merge_angle > 0.0 && merge_angle < 3.14159265358979323846 / 2,
            "PurityConfig: merge_angle outside (0, pi/2)");
  }
};

namespace detail {

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace detail

/// Simplified spatial-purity extraction: windows whose pixels stay within
/// homogeneity_threshold mean angle of the window centroid yield candidate
/// spectra; candidates sharing pixels or spectrally close centroids collapse
/// into one material class. Classes ordered by descending support area.
inline SpectralLibrary extract_insitu_library(const HyperCube& cube,
                                              const PurityConfig& cfg) {
  cfg.validate();
  cube.validate();
  const int r = cfg.window_radius;
  require(cube.height >= 2 * r + 1 && cube.width >= 2 * r + 1,
          "extract_insitu_library: cube smaller than window diameter");

  struct Candidate {
    Vector centroid;
    std::vector<int> support;
    double homogeneity;  // mean angle to centroid, lower is purer
  };
  std::vector<Candidate> cands;

  const int win = (2 * r + 1) * (2 * r + 1);
  for (int row = r; row < cube.height - r; ++row)
    for (int col = r; col < cube.width - r; ++col) {
      Candidate c;
      c.support.reserve(win);
      Vector centroid = Vector::Zero(cube.bands());
      for (int dr = -r; dr <= r; ++dr)
        for (int dc = -r; dc <= r; ++dc) {
          const int pix = (row + dr) * cube.width + (col + dc);
          c.support.push_back(pix);
          centroid += cube.data.col(pix);
        }
      centroid /= win;
      if (centroid.norm() == 0.0) continue;
      double mean_angle = 0.0;
      bool usable = true;
      for (int pix : c.support) {
        if (cube.data.col(pix).norm() == 0.0) {
          usable = false;
          break;
        }
        mean_angle += spectral_angle(cube.data.col(pix), centroid);
      }
      if (!usable) continue;
      mean_angle /= win;
      if (mean_angle <= cfg.homogeneity_threshold) {
        c.centroid = std::move(centroid);
        c.homogeneity = mean_angle;
        cands.push_back(std::move(c));
      }
    }
  if (cands.empty())
    throw Error("extract_insitu_library: no pure neighborhoods found; relax "
                "homogeneity_threshold or shrink window_radius");

  // Spatial-overlap merge via per-pixel candidate lists.
  detail::DisjointSet ds(static_cast<int>(cands.size()));
  {
    std::vector<int> owner(static_cast<std::size_t>(cube.pixels()), -1);
    for (int i = 0; i < static_cast<int>(cands.size()); ++i)
      for (int pix : cands[i].support) {
        if (owner[pix] >= 0) ds.unite(i, owner[pix]);
        owner[pix] = i;
      }
  }

  struct MaterialClass {
    std::vector<int> members;  // candidate indices, row-major discovery order
    Vector centroid;
    std::size_t area = 0;
  };
  std::vector<MaterialClass> classes;
  {
    std::vector<int> root_to_class;
    std::vector<int> roots;
    for (int i = 0; i < static_cast<int>(cands.size()); ++i) {
      const int root = ds.find(i);
      auto it = std::find(roots.begin(), roots.end(), root);
      int ci;
      if (it == roots.end()) {
        roots.push_back(root);
        classes.emplace_back();
        ci = static_cast<int>(classes.size()) - 1;
      } else {
        ci = static_cast<int>(it - roots.begin());
      }
      classes[ci].members.push_back(i);
    }
  }
  auto refresh = [&](MaterialClass& mc) {
    mc.centroid = Vector::Zero(cube.bands());
    std::vector<int> pixels;
    for (int i : mc.members) {
      mc.centroid += cands[i].centroid;
      pixels.insert(pixels.end(), cands[i].support.begin(), cands[i].support.end());
    }
    mc.centroid /= static_cast<double>(mc.members.size());
    std::sort(pixels.begin(), pixels.end());
    mc.area = static_cast<std::size_t>(
        std::unique(pixels.begin(), pixels.end()) - pixels.begin());
  };
  for (auto& mc : classes) refresh(mc);

  // Spectral merge between classes, repeated until stable.
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t a = 0; a < classes.size() && !merged; ++a)
      for (std::size_t b = a + 1; b < classes.size() && !merged; ++b)
        if (spectral_angle(classes[a].centroid, classes[b].centroid) < cfg.merge_angle) {
          classes[a].members.insert(classes[a].members.end(),
                                    classes[b].members.begin(),
                                    classes[b].members.end());
          classes.erase(classes.begin() + static_cast<long>(b));
          refresh(classes[a]);
          merged = true;
        }
  }

  std::stable_sort(classes.begin(), classes.end(),
                   [](const MaterialClass& a, const MaterialClass& b) {
                     return a.area > b.area;
                   });

  SpectralLibrary out;
  out.kind = LibraryKind::in_situ;
  std::vector<Vector> columns;
  for (auto& mc : classes) {
    // Purest candidates first; row-major position breaks ties.
    std::stable_sort(mc.members.begin(), mc.members.end(), [&](int a, int b) {
      return cands[a].homogeneity < cands[b].homogeneity;
    });
    const int take = std::min<int>(cfg.max_candidates_per_class,
                                   static_cast<int>(mc.members.size()));
    const int begin = static_cast<int>(columns.size());
    for (int t = 0; t < take; ++t)
      columns.push_back(cands[mc.members[t]].centroid.cwiseMax(0.0));
    out.class_offsets.emplace_back(begin, static_cast<int>(columns.size()));
  }
  out.signatures.resize(cube.bands(), static_cast<long>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j)
    out.signatures.col(static_cast<long>(j)) = columns[j];
  out.validate();
  return out;
}

/// Segmentation summary for the JSON report.
struct SegmentationReport {
  int k = 0;
  double zeta = 0.0;
  std::vector<double> eigvals;
  double explained_fraction = 0.0;
  double clamp_norm_ratio = 0.0;
};

struct SegmentationResult {
  PcaModel model;
  SpectralLibrary endmembers;
  SpectralLibrary variability;
  SegmentationReport report;
};

inline SegmentationResult segment_library(const SpectralLibrary& X, double zeta,
                                          bool add_mean = false) {
  SegmentationResult res;
  res.model = pca_decompose(X);
  res.model.k = select_k(res.model.eigvals, zeta);
  res.endmembers = build_endmember_library(X, res.model, &res.report.clamp_norm_ratio);
  res.variability = build_variability_library(X, res.model, add_mean);
  res.report.k = res.model.k;
  res.report.zeta = zeta;
  res.report.eigvals.assign(res.model.eigvals.data(),
                            res.model.eigvals.data() + res.model.eigvals.size());
  res.report.explained_fraction =
      res.model.eigvals.head(res.model.k).sum() / res.model.eigvals.sum();
  return res;
}

}  // namespace svasu
