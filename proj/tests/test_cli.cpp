// End-to-end exercises of the command-line front-end: spawns the real
// binary, drives a miniature pipeline through every subcommand and checks
// exit codes and artifacts.
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "rankiq/dataset.hpp"
#include "rankiq/pairgen.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = RANKIQ_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string stderr_text;
};

RunResult run_cli(const std::string& args) {
  const fs::path err = fs::temp_directory_path() / "rankiq_cli_stderr.txt";
  const std::string cmd = kCli + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  std::string text(std::istreambuf_iterator<char>(in), {});
  return {WEXITSTATUS(status), text};
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "rankiq_cli_pipeline";
  return dir;
}

std::string q(const fs::path& p) { return p.string(); }

}  // namespace

TEST_CASE("help exits 0, usage errors exit 1") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("synth --help").exit_code == 0);
  CHECK(run_cli("no-such-command").exit_code == 1);
  CHECK(run_cli("synth --side 32").exit_code == 1);  // missing --seed/--out
  CHECK(run_cli("").exit_code == 1);
}

TEST_CASE("the full pipeline runs through every subcommand") {
  const fs::path dir = work_dir();
  fs::remove_all(dir);
  fs::create_directories(dir);

  // synth -> images + index + features
  REQUIRE(run_cli("synth --count 12 --side 32 --seed 5 --out " + q(dir))
              .exit_code == 0);
  CHECK(fs::exists(dir / "index.csv"));
  CHECK(fs::exists(dir / "features.csv"));
  CHECK(fs::exists(dir / "images/00000.pgm"));

  // score -> calibrated scores + pseudo-MOS
  REQUIRE(run_cli("score --index " + q(dir / "index.csv") +
                  " --oracles psnr,ssim --calibrate levels --out " +
                  q(dir / "scores.csv") + " --mos-out " + q(dir / "mos.csv"))
              .exit_code == 0);
  const rankiq::Dataset ds =
      rankiq::load_dataset(q(dir / "features.csv"), q(dir / "scores.csv"),
                           q(dir / "mos.csv"));
  CHECK(ds.size() == 12 * 11);
  CHECK(ds.source_count == 12);

  // gen-pairs (+ lists)
  REQUIRE(run_cli("gen-pairs --scores " + q(dir / "scores.csv") +
                  " --budget 4000 --seed 7 --out " + q(dir / "dips.csv") +
                  " --lists --lists-out " + q(dir / "dils.csv"))
              .exit_code == 0);
  const auto dips = rankiq::load_dips(q(dir / "dips.csv"));
  CHECK(dips.size() > 1000);
  CHECK(fs::exists(dir / "dils.csv"));

  // train, pairwise linear
  REQUIRE(run_cli("train --pairs " + q(dir / "dips.csv") + " --features " +
                  q(dir / "features.csv") + " --scores " + q(dir / "scores.csv") +
                  " --arch 16 --batch 256 --lr 0.001 --epochs 4 --seed 9" +
                  " --val-frac 0.2 --out " + q(dir / "model_lin.json") +
                  " --log " + q(dir / "train_log.csv"))
              .exit_code == 0);
  CHECK(fs::exists(dir / "model_lin.json"));
  CHECK(fs::exists(dir / "train_log.csv"));

  // train, listwise mlp
  REQUIRE(run_cli("train --lists " + q(dir / "dils.csv") + " --features " +
                  q(dir / "features.csv") + " --scores " + q(dir / "scores.csv") +
                  " --arch 16,8,4 --batch 256 --lr 0.0001 --seed 9 --val-frac 0.2" +
                  " --out " + q(dir / "model_mlp.json"))
              .exit_code == 0);

  // predict
  REQUIRE(run_cli("predict --model " + q(dir / "model_lin.json") +
                  " --features " + q(dir / "features.csv") + " --out " +
                  q(dir / "pred_lin.csv"))
              .exit_code == 0);
  REQUIRE(run_cli("predict --model " + q(dir / "model_mlp.json") +
                  " --features " + q(dir / "features.csv") + " --out " +
                  q(dir / "pred_mlp.csv"))
              .exit_code == 0);

  // eval with sessions, pairs and MOS
  REQUIRE(run_cli("eval --model " + q(dir / "model_lin.json") + " --features " +
                  q(dir / "features.csv") + " --scores " + q(dir / "scores.csv") +
                  " --mos " + q(dir / "mos.csv") + " --pairs " +
                  q(dir / "dips.csv") + " --sessions 20 --split 0.8 --seed 3" +
                  " --report " + q(dir / "report.json"))
              .exit_code == 0);
  nlohmann::json report;
  {
    std::ifstream in(dir / "report.json");
    in >> report;
  }
  CHECK(report.contains("D"));
  CHECK(report.contains("L_s"));
  CHECK(report.contains("P"));
  CHECK(report["session_count"] == 20);
  CHECK(report["srcc_median"].contains("all"));

  // gmad between the two models
  REQUIRE(run_cli("gmad --attacker " + q(dir / "pred_mlp.csv") + " --defender " +
                  q(dir / "pred_lin.csv") + " --levels 5 --eps 0.5 --out " +
                  q(dir / "gmad.csv"))
              .exit_code == 0);
  CHECK(fs::exists(dir / "gmad.csv"));
}

TEST_CASE("predict reports a dimension mismatch as a data error") {
  const fs::path dir = work_dir();
  REQUIRE(fs::exists(dir / "model_lin.json"));  // from the pipeline test
  const fs::path bad = dir / "bad_features.csv";
  {
    std::ofstream out(bad);
    out << "id,f0,f1\n0,1,2\n";
  }
  const auto r = run_cli("predict --model " + q(dir / "model_lin.json") +
                         " --features " + q(bad) + " --out " +
                         q(dir / "nope.csv"));
  CHECK(r.exit_code == 2);
  CHECK(r.stderr_text.find("dimension") != std::string::npos);
}

TEST_CASE("data errors surface as exit code 2") {
  const auto r = run_cli("gen-pairs --scores /nonexistent.csv --budget 10 "
                         "--seed 1 --out /tmp/rankiq_nope.csv");
  CHECK(r.exit_code == 2);
  CHECK(r.stderr_text.find("error:") != std::string::npos);

  const fs::path dir = work_dir();
  const auto arch = run_cli("train --pairs " + q(dir / "dips.csv") +
                            " --features " + q(dir / "features.csv") +
                            " --scores " + q(dir / "scores.csv") +
                            " --arch 8 --seed 1 --out " + q(dir / "nope.json"));
  CHECK(arch.exit_code == 2);
  CHECK(arch.stderr_text.find("dimension") != std::string::npos);
}

TEST_CASE("a miniature demo is deterministic") {
  const fs::path a = fs::temp_directory_path() / "rankiq_cli_demo_a";
  const fs::path b = fs::temp_directory_path() / "rankiq_cli_demo_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string flags =
      " --sources 12 --side 32 --budget 3000 --eval-budget 1500 "
      "--list-budget 1000 --sessions 10";
  REQUIRE(run_cli("demo --seed 4 --out " + q(a) + flags).exit_code == 0);
  REQUIRE(run_cli("demo --seed 4 --out " + q(b) + flags).exit_code == 0);
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  for (const char* name :
       {"features.csv", "scores.csv", "mos.csv", "dips.csv", "eval_dips.csv",
        "dils.csv", "model_linear.json", "model_mlp.json", "report.json"}) {
    INFO(name);
    CHECK(slurp(a / name) == slurp(b / name));
  }
}
