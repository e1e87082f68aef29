// Command-line driver for the SVASU unmixing pipeline. Stages mirror the
// processing flow: synth -> extract/segment -> unmix -> eval, each emitting a
// JSON manifest sufficient to reproduce the run.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "svasu/io.hpp"
#include "svasu/library_builder.hpp"
#include "svasu/metrics.hpp"
#include "svasu/pipeline.hpp"
#include "svasu/solver.hpp"
#include "svasu/synthgen.hpp"

namespace {

using nlohmann::json;
using namespace svasu;

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SVASU_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

json solver_config_to_json(const SolverConfig& cfg) {
  return json{{"alpha", cfg.alpha},         {"beta", cfg.beta},
              {"gamma", cfg.gamma},         {"epsilon", cfg.epsilon},
              {"max_iters", cfg.max_iters}, {"rel_tol", cfg.rel_tol},
              {"seed", cfg.seed},           {"asc_enabled", cfg.asc_enabled},
              {"asc_weight", cfg.asc_weight}};
}

struct SynthArgs {
  int pixels = 2500;
  int bands = 200;
  int endmembers = 5;
  int max_active = 4;
  double signature_snr = 30.0;
  double scene_snr = 40.0;
  int copies = 4;
  std::uint64_t seed = 0;
  std::string library_csv;  // optional user-supplied base spectra
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.n_pixels = a.pixels;
  cfg.n_bands = a.bands;
  cfg.n_endmembers = a.endmembers;
  cfg.max_active = a.max_active;
  cfg.signature_snr_db = a.signature_snr;
  cfg.scene_snr_db = a.scene_snr;
  cfg.variability_copies = a.copies;
  cfg.seed = a.seed;

  json manifest = {{"stage", "synth"},
                   {"tool_version", kToolVersion},
                   {"config",
                    {{"n_pixels", cfg.n_pixels},
                     {"n_bands", cfg.n_bands},
                     {"n_endmembers", cfg.n_endmembers},
                     {"max_active", cfg.max_active},
                     {"signature_snr_db", cfg.signature_snr_db},
                     {"scene_snr_db", cfg.scene_snr_db},
                     {"variability_copies", cfg.variability_copies},
                     {"signature_noise_power", "per-signature"},
                     {"seed", cfg.seed}}},
                   {"base_library_csv", a.library_csv}};
  const auto dir = resolve_run_dir(a.out, manifest);

  std::optional<SpectralLibrary> user_base;
  if (!a.library_csv.empty()) {
    user_base.emplace();
    user_base->signatures = load_matrix_csv(a.library_csv);
    user_base->kind = LibraryKind::in_situ;
    user_base->validate();
    cfg.n_bands = user_base->bands();
  }
  const SynthScene scene = generate_scene(cfg, user_base ? &*user_base : nullptr);

  save_cube(scene.cube, dir / "cube.json", "cube.raw");
  save_matrix_csv(scene.truth_a.values, dir / "truth_abundance.csv");
  save_matrix_csv(scene.base.signatures, dir / "base_library.csv");
  save_matrix_csv(scene.insitu.signatures, dir / "insitu_library.csv");
  write_json({{"class_offsets", class_offsets_to_json(scene.insitu.class_offsets)}},
             dir / "insitu_classes.json");
  manifest["config_hash"] = config_hash(manifest);
  write_json(manifest, dir / "manifest.json");
  std::cout << dir.string() << "\n";
  return 0;
}

struct ExtractArgs {
  std::string cube;
  int window_radius = 2;
  double homogeneity_threshold_deg = 2.0;
  int max_candidates = 5;
  double merge_angle_deg = 5.0;
  std::string out;
};

int cmd_extract(const ExtractArgs& a) {
  json manifest = {{"stage", "extract"},
                   {"tool_version", kToolVersion},
                   {"cube", a.cube},
                   {"config",
                    {{"window_radius", a.window_radius},
                     {"homogeneity_threshold_deg", a.homogeneity_threshold_deg},
                     {"max_candidates_per_class", a.max_candidates},
                     {"merge_angle_deg", a.merge_angle_deg}}}};
  const auto dir = resolve_run_dir(a.out, manifest);

  const HyperCube cube = load_cube(a.cube);
  PurityConfig cfg;
  cfg.window_radius = a.window_radius;
  cfg.homogeneity_threshold = a.homogeneity_threshold_deg * kDegree;
  cfg.max_candidates_per_class = a.max_candidates;
  cfg.merge_angle = a.merge_angle_deg * kDegree;
  const SpectralLibrary lib = extract_insitu_library(cube, cfg);

  save_matrix_csv(lib.signatures, dir / "insitu_library.csv");
  write_json({{"class_offsets", class_offsets_to_json(lib.class_offsets)}},
             dir / "insitu_classes.json");
  manifest["config_hash"] = config_hash(manifest);
  write_json(manifest, dir / "manifest.json");
  std::cout << dir.string() << "\n";
  return 0;
}

struct SegmentArgs {
  std::string library;
  std::string classes;
  double zeta = 0.99;
  bool add_mean = false;
  std::string out;
};

int cmd_segment(const SegmentArgs& a) {
  json manifest = {{"stage", "segment"},
                   {"tool_version", kToolVersion},
                   {"library", a.library},
                   {"classes", a.classes},
                   {"config", {{"zeta", a.zeta}, {"add_mean", a.add_mean}}}};
  const auto dir = resolve_run_dir(a.out, manifest);

  SpectralLibrary lib;
  lib.signatures = load_matrix_csv(a.library);
  lib.kind = LibraryKind::in_situ;
  if (!a.classes.empty())
    lib.class_offsets = class_offsets_from_json(read_json(a.classes).at("class_offsets"));
  lib.validate();

  const SegmentationResult seg = segment_library(lib, a.zeta, a.add_mean);
  save_matrix_csv(seg.endmembers.signatures, dir / "endmember_library.csv");
  write_json({{"class_offsets", class_offsets_to_json(seg.endmembers.class_offsets)}},
             dir / "endmember_classes.json");
  save_matrix_csv(seg.variability.signatures, dir / "variability_library.csv");
  write_json({{"k", seg.report.k},
              {"zeta", seg.report.zeta},
              {"eigvals", seg.report.eigvals},
              {"explained_fraction", seg.report.explained_fraction},
              {"clamp_norm_ratio", seg.report.clamp_norm_ratio}},
             dir / "segment_report.json");
  manifest["config_hash"] = config_hash(manifest);
  write_json(manifest, dir / "manifest.json");
  std::cout << dir.string() << "\n";
  return 0;
}

struct UnmixArgs {
  std::string cube;
  std::string m_library;
  std::string v_library;
  SolverConfig cfg;
  double zeta = 0.99;  // recorded for provenance; segmentation consumed it
  std::string baseline = "none";
  double lambda = 1e-3;
  std::string preset;
  int threads = 0;
  std::string out;
};

int cmd_unmix(UnmixArgs a) {
  if (a.preset == "jasper") {
    a.cfg.alpha = 1.0;
    a.cfg.beta = 1e3;
    a.cfg.gamma = 1e6;
  } else if (a.preset == "cuprite") {
    a.cfg.alpha = 3.0;
    a.cfg.beta = 1e4;
    a.cfg.gamma = 1e6;
  } else if (!a.preset.empty()) {
    throw InvalidArgument("unknown preset '" + a.preset + "'");
  }
  json manifest = {{"stage", "unmix"},
                   {"tool_version", kToolVersion},
                   {"cube", a.cube},
                   {"endmember_library", a.m_library},
                   {"variability_library", a.v_library},
                   {"config", solver_config_to_json(a.cfg)},
                   {"zeta", a.zeta},
                   {"baseline", a.baseline},
                   {"lambda", a.lambda},
                   {"threads", resolve_threads(a.threads)}};
  const auto dir = resolve_run_dir(a.out, manifest);

  HyperCube cube = load_cube(a.cube);
  SpectralLibrary m_lib;
  m_lib.signatures = load_matrix_csv(a.m_library);
  m_lib.kind = LibraryKind::endmember;
  m_lib.validate();
  SpectralLibrary v_lib;
  v_lib.kind = LibraryKind::variability;
  if (!a.v_library.empty()) {
    v_lib.signatures = load_matrix_csv(a.v_library);
    v_lib.validate();
  } else {
    v_lib.signatures.resize(cube.bands(), 0);
  }

  if (a.cfg.asc_enabled) {
    std::tie(cube, m_lib) = augment_pseudo_band(cube, m_lib, a.cfg.asc_weight);
    if (v_lib.size() > 0) v_lib.signatures = append_constant_row(v_lib.signatures, 0.0);
  }

  const SvasuResult res = svasu_solve(cube, m_lib, v_lib, a.cfg);
  save_matrix_csv(res.A.values, dir / "abundance.csv");
  if (res.B.values.size() > 0) save_matrix_csv(res.B.values, dir / "coefficients.csv");
  write_json({{"iterations", res.report.iterations},
              {"converged", res.report.converged},
              {"wall_time_s", res.report.wall_time_s},
              {"objective_trace", res.report.objective_trace},
              {"unrelaxed_objective_trace", res.report.unrelaxed_objective_trace}},
             dir / "solver_report.json");

  if (a.baseline == "sunsal") {
    const SunsalResult base = baseline_sunsal(cube.data, m_lib.signatures, a.lambda);
    save_matrix_csv(base.A.values, dir / "baseline_abundance.csv");
    write_json({{"iterations", base.iterations},
                {"converged", base.converged},
                {"objective", base.objective}},
               dir / "baseline_report.json");
  } else if (a.baseline != "none") {
    throw InvalidArgument("unknown baseline '" + a.baseline + "'");
  }
  manifest["config_hash"] = config_hash(manifest);
  write_json(manifest, dir / "manifest.json");
  std::cout << dir.string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string cube;
  std::string m_library;
  std::string abundance;
  std::string v_library;
  std::string coefficients;
  std::string truth_abundance;
  std::string classes;
  std::string baseline_abundance;
  bool error_maps = false;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  json manifest = {{"stage", "eval"},
                   {"tool_version", kToolVersion},
                   {"cube", a.cube},
                   {"endmember_library", a.m_library},
                   {"abundance", a.abundance},
                   {"variability_library", a.v_library},
                   {"coefficients", a.coefficients},
                   {"truth_abundance", a.truth_abundance},
                   {"classes", a.classes},
                   {"baseline_abundance", a.baseline_abundance}};
  const auto dir = resolve_run_dir(a.out, manifest);

  const HyperCube cube = load_cube(a.cube);
  const Matrix m_lib = load_matrix_csv(a.m_library);
  const Matrix est_a = load_matrix_csv(a.abundance);
  std::optional<Matrix> v_lib, est_b, truth;
  if (!a.v_library.empty()) v_lib = load_matrix_csv(a.v_library);
  if (!a.coefficients.empty()) est_b = load_matrix_csv(a.coefficients);
  if (!a.truth_abundance.empty()) truth = load_matrix_csv(a.truth_abundance);
  std::vector<ClassRange> offsets;
  if (!a.classes.empty())
    offsets = class_offsets_from_json(read_json(a.classes).at("class_offsets"));

  const std::string hash = config_hash(manifest);
  json out;
  EvalReport rep = evaluate_run(truth ? &*truth : nullptr, est_a, cube.data, m_lib,
                                v_lib ? &*v_lib : nullptr,
                                est_b ? &*est_b : nullptr, offsets);
  rep.config_hash = hash;
  out["svasu"] = rep.to_json();

  if (!a.baseline_abundance.empty()) {
    const Matrix base_a = load_matrix_csv(a.baseline_abundance);
    EvalReport base = evaluate_run(truth ? &*truth : nullptr, base_a, cube.data,
                                   m_lib, nullptr, nullptr, offsets);
    base.config_hash = hash;
    out["baseline"] = base.to_json();
  }
  write_json(out, dir / "eval.json");

  if (a.error_maps) {
    // Per-pixel mean-over-bands error grids, one CSV per reconstruction order.
    const Matrix first = m_lib * est_a;
    auto to_grid = [&](const Matrix& err) {
      Matrix grid(cube.height, cube.width);
      for (int r = 0; r < cube.height; ++r)
        for (int c = 0; c < cube.width; ++c)
          grid(r, c) = err.col(r * cube.width + c).cwiseAbs().mean();
      return grid;
    };
    save_matrix_csv(to_grid(cube.data - first), dir / "error_map_first.csv");
    if (v_lib && est_b)
      save_matrix_csv(to_grid(cube.data - first - *v_lib * *est_b),
                      dir / "error_map_second.csv");
  }
  manifest["config_hash"] = hash;
  write_json(manifest, dir / "manifest.json");
  std::cout << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SVASU: spectral-variability augmented sparse unmixing"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic LMM scene");
  s->add_option("--pixels", synth.pixels, "Scene size n (square grids preferred)");
  s->add_option("--bands", synth.bands, "Band count b");
  s->add_option("--endmembers", synth.endmembers, "Endmember count p");
  s->add_option("--max-active", synth.max_active, "Max active endmembers per pixel");
  s->add_option("--signature-snr", synth.signature_snr,
                "Per-signature variability noise, dB");
  s->add_option("--scene-snr", synth.scene_snr, "Whole-image additive noise, dB");
  s->add_option("--copies", synth.copies, "Perturbed variants per base signature");
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--library", synth.library_csv,
                "Optional base-signature CSV (replaces the generator)");
  s->add_option("--out", synth.out, "Run directory (default runs/<config-hash>)");

  ExtractArgs extract;
  auto* x = app.add_subcommand("extract",
                               "Extract an in-situ library from pure neighborhoods");
  x->add_option("--cube", extract.cube, "Cube header JSON")->required();
  x->add_option("--window-radius", extract.window_radius, "Neighborhood half-size");
  x->add_option("--homogeneity-threshold", extract.homogeneity_threshold_deg,
                "Max mean spectral angle within a pure window, degrees");
  x->add_option("--max-candidates", extract.max_candidates,
                "Representatives kept per material class");
  x->add_option("--merge-angle", extract.merge_angle_deg,
                "Class-merge spectral angle, degrees");
  x->add_option("--out", extract.out, "Run directory");

  SegmentArgs segment;
  auto* g = app.add_subcommand(
      "segment", "Split a library into endmember and variability parts by PCA");
  g->add_option("--library", segment.library, "In-situ library CSV")->required();
  g->add_option("--classes", segment.classes, "Class-offsets JSON sidecar");
  g->add_option("--zeta", segment.zeta,
                "Cumulative-eigenvalue threshold zeta in (0,1]");
  g->add_flag("--add-mean", segment.add_mean,
              "Add the library mean back into the variability columns");
  g->add_option("--out", segment.out, "Run directory");

  UnmixArgs unmix;
  auto* u = app.add_subcommand("unmix", "Two-order sparse decomposition");
  u->add_option("--cube", unmix.cube, "Cube header JSON")->required();
  u->add_option("--endmember-library", unmix.m_library, "Endmember library CSV")
      ->required();
  u->add_option("--variability-library", unmix.v_library, "Variability library CSV");
  u->add_option("--alpha", unmix.cfg.alpha, "Data-fit balance (alpha)");
  u->add_option("--beta", unmix.cfg.beta, "Sparsity weight (beta)");
  u->add_option("--gamma", unmix.cfg.gamma, "Coefficient-generalization weight (gamma)");
  u->add_option("--epsilon", unmix.cfg.epsilon, "Reweighting stabilizer (epsilon)");
  u->add_option("--zeta", unmix.zeta, "Segmentation threshold (zeta), for provenance");
  u->add_option("--max-iters", unmix.cfg.max_iters, "Iteration cap");
  u->add_option("--rel-tol", unmix.cfg.rel_tol, "Relative objective-change stop");
  u->add_option("--seed", unmix.cfg.seed, "Initialization seed");
  u->add_flag("--asc", unmix.cfg.asc_enabled, "Enable pseudo-band sum-to-one");
  u->add_option("--asc-weight", unmix.cfg.asc_weight, "Pseudo-band magnitude");
  u->add_option("--baseline", unmix.baseline, "none|sunsal");
  u->add_option("--lambda", unmix.lambda, "Baseline l1 weight (lambda)");
  u->add_option("--preset", unmix.preset, "jasper|cuprite parameter bundles");
  u->add_option("--threads", unmix.threads, "Worker threads (1 = deterministic)");
  u->add_option("--out", unmix.out, "Run directory");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score abundances and reconstructions");
  e->add_option("--cube", eval.cube, "Cube header JSON")->required();
  e->add_option("--endmember-library", eval.m_library, "Endmember library CSV")
      ->required();
  e->add_option("--abundance", eval.abundance, "Estimated abundance CSV")->required();
  e->add_option("--variability-library", eval.v_library, "Variability library CSV");
  e->add_option("--coefficients", eval.coefficients, "Variability coefficients CSV");
  e->add_option("--truth-abundance", eval.truth_abundance, "Ground-truth CSV");
  e->add_option("--classes", eval.classes, "Class-offsets JSON for row aggregation");
  e->add_option("--baseline-abundance", eval.baseline_abundance,
                "Baseline abundance CSV for a side-by-side report");
  e->add_flag("--error-maps", eval.error_maps, "Emit per-pixel mean-error CSV grids");
  e->add_option("--out", eval.out, "Run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& pe) {
    std::cerr << "error: flags: " << pe.what() << "\n";
    return 2;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*x) return cmd_extract(extract);
    if (*g) return cmd_segment(segment);
    if (*u) return cmd_unmix(unmix);
    if (*e) return cmd_eval(eval);
  } catch (const svasu::DimensionError& err) {
    std::cerr << "error: dimensions: " << err.what() << "\n";
    return 4;
  } catch (const svasu::IoError& err) {
    std::cerr << "error: io: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
