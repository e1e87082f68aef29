#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = SVASU_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("svasu_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json_file(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  return json::parse(f);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("full pipeline: synth -> segment -> unmix -> eval") {
  TempDir tmp;
  const fs::path syn = tmp.path / "syn";
  const fs::path seg = tmp.path / "seg";
  const fs::path unm = tmp.path / "unm";
  const fs::path evl = tmp.path / "evl";

  CHECK(run("synth --pixels 400 --bands 40 --endmembers 3 --max-active 2"
            " --copies 2 --seed 7 --out " + syn.string()) == 0);
  CHECK(fs::exists(syn / "cube.json"));
  CHECK(fs::exists(syn / "truth_abundance.csv"));
  CHECK(fs::exists(syn / "insitu_library.csv"));
  CHECK(fs::exists(syn / "manifest.json"));

  CHECK(run("segment --library " + (syn / "insitu_library.csv").string() +
            " --classes " + (syn / "insitu_classes.json").string() +
            " --zeta 0.99 --out " + seg.string()) == 0);
  CHECK(fs::exists(seg / "endmember_library.csv"));
  CHECK(fs::exists(seg / "variability_library.csv"));
  const json segrep = read_json_file(seg / "segment_report.json");
  CHECK(segrep["k"].get<int>() >= 1);

  CHECK(run("unmix --cube " + (syn / "cube.json").string() +
            " --endmember-library " + (seg / "endmember_library.csv").string() +
            " --variability-library " + (seg / "variability_library.csv").string() +
            " --alpha 9 --beta 10 --gamma 1e4 --max-iters 150 --seed 1"
            " --baseline sunsal --threads 1 --out " + unm.string()) == 0);
  CHECK(fs::exists(unm / "abundance.csv"));
  CHECK(fs::exists(unm / "coefficients.csv"));
  CHECK(fs::exists(unm / "baseline_abundance.csv"));
  const json solrep = read_json_file(unm / "solver_report.json");
  CHECK(solrep["iterations"].get<int>() >= 1);
  CHECK(solrep["objective_trace"].size() >= 2);

  CHECK(run("eval --cube " + (syn / "cube.json").string() +
            " --endmember-library " + (seg / "endmember_library.csv").string() +
            " --abundance " + (unm / "abundance.csv").string() +
            " --variability-library " + (seg / "variability_library.csv").string() +
            " --coefficients " + (unm / "coefficients.csv").string() +
            " --truth-abundance " + (syn / "truth_abundance.csv").string() +
            " --classes " + (seg / "endmember_classes.json").string() +
            " --baseline-abundance " + (unm / "baseline_abundance.csv").string() +
            " --out " + evl.string()) == 0);
  const json report = read_json_file(evl / "eval.json");
  REQUIRE(report.contains("svasu"));
  REQUIRE(report.contains("baseline"));
  CHECK(report["svasu"].contains("rmse_a"));
  CHECK(report["svasu"].contains("residual_ratio_second_to_first"));
  CHECK(report["svasu"]["config_hash"].get<std::string>().size() == 12);
}

TEST_CASE("exit code 2: unknown flag") {
  CHECK(run("synth --no-such-flag 1") == 2);
  CHECK(run("unmix --cube x.json") != 0);  // missing required flag
  CHECK(run("unmix") == 2);
}

TEST_CASE("exit code 3: missing input file") {
  TempDir tmp;
  CHECK(run("segment --library " + (tmp.path / "absent.csv").string() +
            " --out " + (tmp.path / "o").string()) == 3);
  CHECK(run("unmix --cube " + (tmp.path / "absent.json").string() +
            " --endmember-library " + (tmp.path / "absent.csv").string() +
            " --out " + (tmp.path / "o2").string()) == 3);
}

TEST_CASE("exit code 4: dimension mismatch") {
  TempDir tmp;
  const fs::path syn = tmp.path / "syn";
  REQUIRE(run("synth --pixels 100 --bands 20 --endmembers 3 --max-active 2 --seed 3 --out " +
              syn.string()) == 0);
  // Library with the wrong band count.
  {
    std::ofstream f(tmp.path / "short_lib.csv");
    for (int i = 0; i < 5; ++i) f << "0.5,0.5,0.5\n";
  }
  CHECK(run("unmix --cube " + (syn / "cube.json").string() +
            " --endmember-library " + (tmp.path / "short_lib.csv").string() +
            " --max-iters 5 --out " + (tmp.path / "o").string()) == 4);
  // Abundance rows != library columns at eval time.
  {
    std::ofstream f(tmp.path / "bad_abund.csv");
    f << "0.5,0.5\n0.5,0.5\n";
  }
  CHECK(run("eval --cube " + (syn / "cube.json").string() +
            " --endmember-library " + (syn / "base_library.csv").string() +
            " --abundance " + (tmp.path / "bad_abund.csv").string() +
            " --out " + (tmp.path / "o3").string()) == 4);
}

TEST_CASE("help exits zero for the app and every subcommand") {
  CHECK(run("--help") == 0);
  CHECK(run("unmix --help") == 0);
}

TEST_CASE("single-threaded reruns reproduce eval JSON bitwise") {
  TempDir tmp;
  const fs::path syn = tmp.path / "syn";
  const fs::path seg = tmp.path / "seg";
  REQUIRE(run("synth --pixels 225 --bands 30 --endmembers 3 --max-active 2"
              " --copies 2 --seed 11 --out " + syn.string()) == 0);
  REQUIRE(run("segment --library " + (syn / "insitu_library.csv").string() +
              " --classes " + (syn / "insitu_classes.json").string() +
              " --out " + seg.string()) == 0);

  auto one_round = [&](const std::string& tag) {
    const fs::path unm = tmp.path / "unm";  // same inputs -> same manifest
    const fs::path evl = tmp.path / ("evl_" + tag);
    REQUIRE(run("unmix --cube " + (syn / "cube.json").string() +
                " --endmember-library " + (seg / "endmember_library.csv").string() +
                " --variability-library " +
                (seg / "variability_library.csv").string() +
                " --max-iters 80 --seed 5 --threads 1 --out " + unm.string()) == 0);
    REQUIRE(run("eval --cube " + (syn / "cube.json").string() +
                " --endmember-library " + (seg / "endmember_library.csv").string() +
                " --abundance " + (unm / "abundance.csv").string() +
                " --variability-library " +
                (seg / "variability_library.csv").string() +
                " --coefficients " + (unm / "coefficients.csv").string() +
                " --truth-abundance " + (syn / "truth_abundance.csv").string() +
                " --classes " + (seg / "endmember_classes.json").string() +
                " --out " + evl.string()) == 0);
    return slurp(evl / "eval.json");
  };
  const std::string a = one_round("a");
  const std::string b = one_round("b");
  CHECK(a == b);
  CHECK(!a.empty());
}

TEST_CASE("default run directory is keyed by the config hash") {
  TempDir tmp;
  const std::string cmd = "cd " + tmp.path.string() + " && " + kCli +
                          " synth --pixels 64 --bands 16 --endmembers 2 --max-active 2 --seed 2"
                          " >/dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  REQUIRE(fs::exists(tmp.path / "runs"));
  int dirs = 0;
  fs::path run_dir;
  for (const auto& e : fs::directory_iterator(tmp.path / "runs")) {
    ++dirs;
    run_dir = e.path();
  }
  REQUIRE(dirs == 1);
  CHECK(run_dir.filename().string().size() == 12);
  CHECK(fs::exists(run_dir / "manifest.json"));
  const json manifest = read_json_file(run_dir / "manifest.json");
  CHECK(manifest["config_hash"].get<std::string>() == run_dir.filename().string());
}
