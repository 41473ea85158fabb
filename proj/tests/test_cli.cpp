#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const std::string& stdout_path = "") {
  std::string cmd = std::string(UDA_CLI_PATH) + " " + args;
  if (!stdout_path.empty()) cmd += " > " + stdout_path;
  cmd += " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uda_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Shared tiny dataset, generated once per process.
const fs::path& data_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch_dir("data");
    REQUIRE(run("synth --out " + d.string() + " --n 40 --seed 5") == 0);
    return d;
  }();
  return dir;
}

std::string tiny_train_args(const fs::path& out, const std::string& extra,
                            int eval_every = 5) {
  return "train --source " + (data_dir() / "source.csv").string() +
         " --target " + (data_dir() / "target.csv").string() + " --out " +
         out.string() +
         " --hidden 8 --embed 4 --pretrain-iters 60 --iters 10 --batch 32"
         " --projections 16 --seed 11 --eval-every " +
         std::to_string(eval_every) + " " + extra;
}

double parse_value(const std::string& text, const std::string& key) {
  const auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size()));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synthetic pipeline produces every artifact") {
  const fs::path out = scratch_dir("pipeline");
  REQUIRE(run(tiny_train_args(out, "")) == 0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "run.jsonl"));
  CHECK(fs::exists(out / "checkpoint.bin"));
  CHECK(fs::exists(out / "report.txt"));
  CHECK(fs::exists(out / "projection.csv"));

  const std::string manifest = slurp(out / "manifest.json");
  CHECK(manifest.find("\"seed\": 11") != std::string::npos);
  CHECK(manifest.find("fnv1a64") != std::string::npos);
  CHECK(manifest.find("\"train_iters\": 10") != std::string::npos);

  const std::string report = slurp(out / "report.txt");
  CHECK(report.find("acc_cp") != std::string::npos);

  std::ifstream log(out / "run.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 12);  // 10 iteration records + 2 evaluation records
  fs::remove_all(out);
}

TEST_CASE("identical commands leave bitwise-identical logs and checkpoints") {
  const fs::path out_a = scratch_dir("rerun_a");
  const fs::path out_b = scratch_dir("rerun_b");
  REQUIRE(run(tiny_train_args(out_a, "")) == 0);
  REQUIRE(run(tiny_train_args(out_b, "")) == 0);
  CHECK(slurp(out_a / "run.jsonl") == slurp(out_b / "run.jsonl"));
  CHECK(slurp(out_a / "checkpoint.bin") == slurp(out_b / "checkpoint.bin"));
  CHECK(slurp(out_a / "projection.csv") == slurp(out_b / "projection.csv"));
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("missing source exits 3 and writes nothing") {
  const fs::path out = scratch_dir("missing");
  const int code =
      run("train --source /nonexistent/source.csv --target " +
          (data_dir() / "target.csv").string() + " --out " + out.string());
  CHECK(code == 3);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("config problems exit 2") {
  const fs::path bad = scratch_dir("badcfg");
  fs::create_directories(bad);
  {
    std::ofstream out(bad / "bad.ini");
    out << "learning_speed = 1\n";
  }
  const fs::path out = bad / "run";
  CHECK(run(tiny_train_args(out, "--config " + (bad / "bad.ini").string())) ==
        2);
  CHECK_FALSE(fs::exists(out));

  CHECK(run(tiny_train_args(out, "--ablate bogus")) == 2);
  CHECK(run(tiny_train_args(out, "--sigma 3.0")) == 2);
  fs::remove_all(bad);
}

TEST_CASE("evaluating a corrupt checkpoint exits 3") {
  const fs::path dir = scratch_dir("corrupt");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "fake.bin", std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK(run("eval --checkpoint " + (dir / "fake.bin").string() +
            " --target " + (data_dir() / "target.csv").string()) == 3);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint evaluation reproduces the in-training baseline number") {
  const fs::path out = scratch_dir("baseline");
  REQUIRE(run(tiny_train_args(out, "--ablate source", 10)) == 0);

  std::ifstream log(out / "run.jsonl");
  std::string line, last_eval;
  while (std::getline(log, line))
    if (line.find("acc_cp") != std::string::npos) last_eval = line;
  REQUIRE_FALSE(last_eval.empty());
  const double logged = parse_value(last_eval, "\"acc_cp\":");

  const fs::path report = out / "eval_stdout.txt";
  REQUIRE(run("eval --checkpoint " + (out / "checkpoint.bin").string() +
                  " --target " + (data_dir() / "target.csv").string(),
              report.string()) == 0);
  const double reported = parse_value(slurp(report), "acc_cp ");
  CHECK(std::abs(logged - reported) < 1e-9);
  fs::remove_all(out);
}

TEST_CASE("gradient check command verifies the build") {
  const fs::path out = scratch_dir("gradcheck");
  fs::create_directories(out);
  const fs::path capture = out / "stdout.txt";
  CHECK(run("gradcheck --instances 5", capture.string()) == 0);
  const std::string text = slurp(capture);
  CHECK(text.find("all gradients verified") != std::string::npos);
  CHECK(text.find("loss_dis") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("binary feature files round through the pipeline") {
  const fs::path dir = scratch_dir("binfmt");
  REQUIRE(run("synth --out " + dir.string() +
              " --n 30 --seed 9 --format binary") == 0);
  CHECK(fs::exists(dir / "source.bin"));
  const fs::path out = dir / "run";
  REQUIRE(run("train --source " + (dir / "source.bin").string() +
              " --target " + (dir / "target.bin").string() + " --out " +
              out.string() +
              " --hidden 8 --embed 4 --pretrain-iters 40 --iters 5"
              " --batch 32 --projections 8 --eval-every 0 --seed 3") == 0);
  CHECK(fs::exists(out / "checkpoint.bin"));
  fs::remove_all(dir);
}

}
