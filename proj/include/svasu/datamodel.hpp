#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "svasu/core.hpp"

namespace svasu {

/// Observed image R flattened to (bands x pixels); pixel index = row*width + col.
struct HyperCube {
  Matrix data;
  int height = 0;
  int width = 0;

  int bands() const { return static_cast<int>(data.rows()); }
  int pixels() const { return static_cast<int>(data.cols()); }

  void validate() const {
    require(height > 0 && width > 0, "HyperCube: nonpositive spatial dims");
    require_dims(static_cast<long>(height) * width == data.cols(),
                 "HyperCube: height*width != pixel count");
    require(data.rows() >= 1, "HyperCube: no bands");
    if (!data.allFinite()) throw InvalidArgument("HyperCube: non-finite entries");
  }
};

enum class LibraryKind { in_situ, endmember, variability };

/// Column range [begin, end) of one material class.
using ClassRange = std::pair<int, int>;

/// Column-stacked spectral signatures; X = [X^(1), ..., X^(p)] when
/// class_offsets is populated.
struct SpectralLibrary {
  Matrix signatures;
  std::vector<ClassRange> class_offsets;  // empty = unpartitioned
  LibraryKind kind = LibraryKind::in_situ;

  int bands() const { return static_cast<int>(signatures.rows()); }
  int size() const { return static_cast<int>(signatures.cols()); }
  int class_count() const { return static_cast<int>(class_offsets.size()); }

  void validate() const {
    require(signatures.cols() >= 1, "SpectralLibrary: empty");
    if (!signatures.allFinite())
      throw InvalidArgument("SpectralLibrary: non-finite entries");
    if (!class_offsets.empty()) {
      int cursor = 0;
      for (const auto& [b, e] : class_offsets) {
        require(b == cursor && e > b, "SpectralLibrary: class_offsets not a partition");
        cursor = e;
      }
      require(cursor == size(), "SpectralLibrary: class_offsets do not cover all columns");
    }
    if (kind != LibraryKind::variability)
      require(signatures.minCoeff() >= 0.0,
              "SpectralLibrary: negative entries in nonnegative kind");
  }
};

/// A (m x n), nonnegative mixing fractions per pixel.
struct AbundanceMatrix {
  Matrix values;

  int rows() const { return static_cast<int>(values.rows()); }
  int pixels() const { return static_cast<int>(values.cols()); }

  void validate() const {
    if (!values.allFinite()) throw InvalidArgument("AbundanceMatrix: non-finite entries");
    require(values.size() == 0 || values.minCoeff() >= 0.0,
            "AbundanceMatrix: negative abundance");
  }
};

/// B (l x n); kept nonnegative by the multiplicative update rule.
struct VariabilityCoefficients {
  Matrix values;

  void validate() const {
    if (!values.allFinite())
      throw InvalidArgument("VariabilityCoefficients: non-finite entries");
    require(values.size() == 0 || values.minCoeff() >= 0.0,
            "VariabilityCoefficients: negative coefficient");
  }
};

inline constexpr double kAscTolerance = 1e-2;

struct SolverConfig {
  double alpha = 9.0;     // data-fit balance
  double beta = 10.0;     // sparsity weight
  double gamma = 1e4;     // coefficient-generalization weight
  double epsilon = 1e-8;  // reweighting stabilizer
  int max_iters = 1000;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;
  bool asc_enabled = false;
  double asc_weight = 1.0;  // pseudo-band magnitude

  void validate() const {
    require(alpha >= 0.0, "SolverConfig: alpha < 0");
    require(beta >= 0.0, "SolverConfig: beta < 0");
    require(gamma >= 0.0, "SolverConfig: gamma < 0");
    require(epsilon > 0.0, "SolverConfig: epsilon <= 0");
    require(max_iters >= 0, "SolverConfig: max_iters < 0");
    require(rel_tol > 0.0, "SolverConfig: rel_tol <= 0");
    require(asc_weight > 0.0, "SolverConfig: asc_weight <= 0");
    require(std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma) &&
                std::isfinite(epsilon) && std::isfinite(rel_tol) &&
                std::isfinite(asc_weight),
            "SolverConfig: non-finite parameter");
  }
};

/// Appends one constant row of value delta to a matrix.
inline Matrix append_constant_row(const Matrix& m, double delta) {
  Matrix out(m.rows() + 1, m.cols());
  out.topRows(m.rows()) = m;
  out.row(m.rows()).setConstant(delta);
  return out;
}

/// Pseudo-band augmentation: both R and M gain a final constant-delta row,
/// so the least-squares fit softly enforces sum(a_j) ~= 1 with strength delta.
inline std::pair<HyperCube, SpectralLibrary> augment_pseudo_band(
    const HyperCube& cube, const SpectralLibrary& lib, double delta) {
  require(delta > 0.0, "augment_pseudo_band: delta must be > 0");
  require_dims(cube.bands() == lib.bands(),
               "augment_pseudo_band: band-count mismatch between cube and library");
  HyperCube r{append_constant_row(cube.data, delta), cube.height, cube.width};
  SpectralLibrary m{append_constant_row(lib.signatures, delta), lib.class_offsets,
                    lib.kind};
  return {std::move(r), std::move(m)};
}

}  // namespace svasu
