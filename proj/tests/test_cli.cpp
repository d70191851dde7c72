#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "gpert/dataio.hpp"
#include "gpert/digest.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace gpert;

namespace {

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("gpert_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  fs::path dataset(std::size_t n, std::uint64_t seed = 1) const {
    const auto p = dir / "data.jsonl";
    write_file(p, synthetic::qa_jsonl(n, seed));
    return p;
  }
  fs::path out() const { return dir / "out"; }
  std::string log() const { return read_file(dir / "log.txt"); }

  // Runs the CLI with `args`, output redirected to log.txt.
  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " \"" GPERT_CLI "\" --out-dir \"" + out().string() + "\" " + args + " > \"" +
                            (dir / "log.txt").string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
};

std::size_t count_lines(const fs::path& p) {
  const auto s = read_file(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("stub perturb writes one line per candidate") {
  Workspace ws("perturb");
  const auto data = ws.dataset(5);
  REQUIRE(ws.run("perturb --dataset \"" + data.string() + "\" --n 10") == 0);
  CHECK(count_lines(ws.out() / "perturbations.jsonl") == 50);
  const auto sets = load_perturbation_sets(ws.out() / "perturbations.jsonl");
  CHECK(sets.size() == 5);
  for (const auto& [id, set] : sets) CHECK(set.candidates.size() == 10);
  CHECK(fs::exists(ws.out() / "manifest.json"));
}

TEST_CASE("rerunning with the same seed reproduces the artifact") {
  Workspace ws("rerun");
  const auto data = ws.dataset(6);
  REQUIRE(ws.run("perturb --seed 3 --dataset \"" + data.string() + "\"") == 0);
  const auto first = sha256_hex(read_file(ws.out() / "perturbations.jsonl"));
  REQUIRE(ws.run("perturb --seed 3 --dataset \"" + data.string() + "\"") == 0);
  CHECK(sha256_hex(read_file(ws.out() / "perturbations.jsonl")) == first);
  REQUIRE(ws.run("perturb --seed 4 --dataset \"" + data.string() + "\"") == 0);
  CHECK(sha256_hex(read_file(ws.out() / "perturbations.jsonl")) != first);
}

TEST_CASE("unreachable embedding endpoint leaves a partial store") {
  Workspace ws("unreachable");
  const auto data = ws.dataset(3);
  REQUIRE(ws.run("perturb --dataset \"" + data.string() + "\" --n 3") == 0);
  const int rc = ws.run("embed --provider remote --dataset \"" + data.string() + "\"",
                        "GPERT_EMBED_ENDPOINT=http://127.0.0.1:9/embed");
  CHECK(rc != 0);
  CHECK(fs::exists(ws.out() / "embeddings.store.partial"));
  CHECK_FALSE(fs::exists(ws.out() / "embeddings.store"));
  CHECK(fs::exists(ws.out() / "audit" / "embed.jsonl"));
}

TEST_CASE("a missing upstream artifact names the command to run") {
  Workspace ws("missing");
  const auto data = ws.dataset(4);
  CHECK(ws.run("sample --dataset \"" + data.string() + "\"") != 0);
  CHECK(ws.log().find("gpert perturb") != std::string::npos);
}

TEST_CASE("a tampered upstream artifact is rejected") {
  Workspace ws("tampered");
  const auto data = ws.dataset(4);
  REQUIRE(ws.run("perturb --dataset \"" + data.string() + "\" --n 4") == 0);
  std::ofstream(ws.out() / "perturbations.jsonl", std::ios::app) << "\n";
  CHECK(ws.run("embed --dataset \"" + data.string() + "\"") != 0);
  CHECK(ws.log().find("gpert perturb") != std::string::npos);
}

TEST_CASE("sample defaults select three prompts per item") {
  Workspace ws("sample");
  const auto data = ws.dataset(6);
  REQUIRE(ws.run("perturb --dataset \"" + data.string() + "\"") == 0);
  REQUIRE(ws.run("embed --dataset \"" + data.string() + "\"") == 0);
  REQUIRE(ws.run("sample --dataset \"" + data.string() + "\" --strategy random --strategy text-sim") == 0);
  for (const char* s : {"random", "text-sim"}) {
    const auto sampled = load_sampled(ws.out() / "sampled" / (std::string(s) + ".jsonl"));
    CHECK(sampled.size() == 6);
    for (const auto& [id, p] : sampled) CHECK(p.indices.size() == 3);
  }
}

TEST_CASE("bad flags and configs exit nonzero") {
  Workspace ws("flags");
  CHECK(ws.run("perturb") != 0);
  CHECK(ws.run("nonsense") != 0);
  const auto data = ws.dataset(3);
  CHECK(ws.run("perturb --dataset \"" + data.string() + "\" --n 0") != 0);
  write_file(ws.dir / "bad.json", R"({"pipeline": {"train_fraction": 1.5}})");
  CHECK(ws.run("--config \"" + (ws.dir / "bad.json").string() + "\" perturb --dataset \"" + data.string() + "\"") != 0);
  CHECK(ws.log().find("train_fraction") != std::string::npos);
}
