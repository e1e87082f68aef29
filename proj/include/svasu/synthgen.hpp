#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <random>

#include "svasu/datamodel.hpp"

namespace svasu {

struct SynthConfig {
  int n_pixels = 10000;
  int n_bands = 420;
  int n_endmembers = 5;
  int max_active = 4;
  double signature_snr_db = 30.0;
  double scene_snr_db = 40.0;
  int variability_copies = 4;
  std::uint64_t seed = 0;

  void validate() const {
    require(n_pixels >= 1, "SynthConfig: n_pixels < 1");
    require(n_bands >= 8, "SynthConfig: n_bands < 8");
    require(n_endmembers >= 1, "SynthConfig: n_endmembers < 1");
    require(max_active >= 1 && max_active <= n_endmembers,
            "SynthConfig: max_active outside [1, n_endmembers]");
    require(std::isfinite(signature_snr_db), "SynthConfig: signature_snr_db not finite");
    require(std::isfinite(scene_snr_db) || scene_snr_db > 0,
            "SynthConfig: scene_snr_db must be finite or +inf (noise disabled)");
    require(variability_copies >= 1, "SynthConfig: variability_copies < 1");
  }
};

/// Noise std for an additive-Gaussian model at the given SNR:
/// 10*log10(mean(signal^2)/sigma^2) = snr_db.
inline double snr_to_sigma(const Matrix& signal, double snr_db) {
  require(signal.size() > 0, "snr_to_sigma: empty signal");
  const double power = signal.squaredNorm() / static_cast<double>(signal.size());
  require(power > 0.0, "snr_to_sigma: all-zero signal");
  return std::sqrt(power / std::pow(10.0, snr_db / 10.0));
}

/// Smooth synthetic mineral-like spectra: positive baseline minus 3..8
/// Gaussian absorption features, peak-normalized to <= 1, pairwise spectral
/// angle >= 5 degrees.
inline SpectralLibrary generate_base_signatures(int n_bands, int n_endmembers,
                                                std::uint64_t seed) {
  require(n_bands >= 8, "generate_base_signatures: need at least 8 bands");
  require(n_endmembers >= 1, "generate_base_signatures: need at least 1 endmember");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const double min_angle = 5.0 * kDegree;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix sig(n_bands, n_endmembers);
    for (int i = 0; i < n_endmembers; ++i) {
      const double baseline = 0.6 + 0.35 * unif(rng);
      const int n_features = 3 + static_cast<int>(unif(rng) * 6.0);  // 3..8
      Vector s = Vector::Constant(n_bands, baseline);
      for (int f = 0; f < n_features; ++f) {
        const double center = unif(rng) * n_bands;
        const double width = n_bands * (0.015 + 0.1 * unif(rng));
        const double depth = 0.05 + 0.35 * unif(rng);
        for (int b = 0; b < n_bands; ++b) {
          const double d = (b - center) / width;
          s[b] -= depth * std::exp(-0.5 * d * d);
        }
      }
      s = s.cwiseMax(0.0);
      const double peak = s.maxCoeff();
      if (peak > 1.0) s /= peak;
      sig.col(i) = s;
    }
    bool separated = true;
    for (int i = 0; i < n_endmembers && separated; ++i)
      for (int j = i + 1; j < n_endmembers && separated; ++j)
        if (sig.col(i).norm() == 0.0 || sig.col(j).norm() == 0.0 ||
            spectral_angle(sig.col(i), sig.col(j)) < min_angle)
          separated = false;
    if (separated) {
      SpectralLibrary lib;
      lib.signatures = sig;
      lib.kind = LibraryKind::in_situ;
      lib.validate();
      return lib;
    }
  }
  throw Error("generate_base_signatures: could not reach pairwise angle separation "
              "after 100 attempts");
}

/// Per-signature Gaussian perturbation at signature_snr_db, clamped at 0.
/// Output columns: each base signature followed by its perturbed variants;
/// class_offsets mark the p material groups.
inline SpectralLibrary inject_signature_variability(const SpectralLibrary& base,
                                                    double signature_snr_db,
                                                    int copies, std::uint64_t seed) {
  require(copies >= 0, "inject_signature_variability: copies < 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int p = base.size();
  const int b = base.bands();
  SpectralLibrary out;
  out.kind = LibraryKind::in_situ;
  out.signatures.resize(b, static_cast<long>(p) * (copies + 1));
  int col = 0;
  for (int i = 0; i < p; ++i) {
    const int begin = col;
    out.signatures.col(col++) = base.signatures.col(i);
    const double sigma = snr_to_sigma(base.signatures.col(i), signature_snr_db);
    for (int c = 0; c < copies; ++c) {
      Vector v = base.signatures.col(i);
      for (int k = 0; k < b; ++k) v[k] += sigma * gauss(rng);
      out.signatures.col(col++) = v.cwiseMax(0.0);
    }
    out.class_offsets.emplace_back(begin, col);
  }
  out.validate();
  return out;
}

/// Per pixel: active-set size uniform in {1..max_active}, endmembers chosen
/// uniformly without replacement, fractions Dirichlet(1,...,1); inactive
/// entries exactly 0 and each column sums to 1.
inline AbundanceMatrix sample_sparse_abundances(int n_pixels, int n_endmembers,
                                                int max_active, std::uint64_t seed) {
  require(n_pixels >= 1, "sample_sparse_abundances: n_pixels < 1");
  require(max_active >= 1 && max_active <= n_endmembers,
          "sample_sparse_abundances: max_active outside [1, n_endmembers]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> size_dist(1, max_active);

  AbundanceMatrix A;
  A.values = Matrix::Zero(n_endmembers, n_pixels);
  std::vector<int> idx(n_endmembers);
  for (int j = 0; j < n_pixels; ++j) {
    const int k = size_dist(rng);
    std::iota(idx.begin(), idx.end(), 0);
    for (int t = 0; t < k; ++t) {
      std::uniform_int_distribution<int> pick(t, n_endmembers - 1);
      std::swap(idx[t], idx[pick(rng)]);
    }
    // Dirichlet(1,..,1) via normalized unit exponentials.
    double total = 0.0;
    std::vector<double> w(k);
    for (int t = 0; t < k; ++t) {
      w[t] = -std::log(1.0 - unif(rng));
      total += w[t];
    }
    for (int t = 0; t < k; ++t) A.values(idx[t], j) = w[t] / total;
  }
  A.validate();
  return A;
}

/// Sentinel for "no noise" in synthesize_cube.
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

struct SynthesizedCube {
  HyperCube cube;
  Matrix noiseless;  // E*A before additive noise
};

/// R = E*A + N with N i.i.d. Gaussian at scene_snr_db (skipped when the SNR
/// is the infinity sentinel). Noise is unclamped.
inline SynthesizedCube synthesize_cube(const SpectralLibrary& E,
                                       const AbundanceMatrix& A, int height,
                                       int width, double scene_snr_db,
                                       std::uint64_t seed) {
  require_dims(E.size() == A.rows(),
               "synthesize_cube: library columns != abundance rows");
  require_dims(static_cast<long>(height) * width == A.values.cols(),
               "synthesize_cube: height*width != pixel count");
  SynthesizedCube out;
  out.noiseless = E.signatures * A.values;
  out.cube.height = height;
  out.cube.width = width;
  out.cube.data = out.noiseless;
  if (!std::isinf(scene_snr_db)) {
    const double sigma = snr_to_sigma(out.noiseless, scene_snr_db);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (long j = 0; j < out.cube.data.cols(); ++j)
      for (long i = 0; i < out.cube.data.rows(); ++i)
        out.cube.data(i, j) += gauss(rng);
  }
  out.cube.validate();
  return out;
}

struct SynthScene {
  SpectralLibrary base;     // p clean signatures
  SpectralLibrary insitu;   // p*(copies+1) columns, class-partitioned
  AbundanceMatrix truth_a;  // over the base signatures
  HyperCube cube;
  Matrix noiseless;
  int height = 0;
  int width = 0;
};

inline std::pair<int, int> scene_grid(int n_pixels) {
  const int root = static_cast<int>(std::lround(std::sqrt(double(n_pixels))));
  if (root * root == n_pixels) return {root, root};
  return {1, n_pixels};
}

/// Full synthetic protocol: base spectra, variability injection, sparse
/// Dirichlet abundances, noisy LMM scene. Deterministic per config.
inline SynthScene generate_scene(const SynthConfig& cfg,
                                 const SpectralLibrary* user_base = nullptr) {
  cfg.validate();
  SynthScene s;
  s.base = user_base ? *user_base
                     : generate_base_signatures(cfg.n_bands, cfg.n_endmembers, cfg.seed);
  require_dims(s.base.size() == cfg.n_endmembers,
               "generate_scene: base library size != n_endmembers");
  s.insitu = inject_signature_variability(s.base, cfg.signature_snr_db,
                                          cfg.variability_copies, cfg.seed + 1);
  s.truth_a = sample_sparse_abundances(cfg.n_pixels, cfg.n_endmembers, cfg.max_active,
                                       cfg.seed + 2);
  std::tie(s.height, s.width) = scene_grid(cfg.n_pixels);
  auto syn = synthesize_cube(s.base, s.truth_a, s.height, s.width, cfg.scene_snr_db,
                             cfg.seed + 3);
  s.cube = std::move(syn.cube);
  s.noiseless = std::move(syn.noiseless);
  return s;
}

}  // namespace svasu
