#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lrvi/cli.hpp"
#include "lrvi/errors.hpp"

namespace fs = std::filesystem;
using lrvi::cli::Json;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "lrvi_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = "cd \"" + workdir().string() + "\" && \"" LRVI_CLI_PATH "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(workdir() / p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(workdir() / p) << text; }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Small labelled benchmark plus an embed config over it, shared by several cases.
void ensure_small_benchmark() {
  if (fs::exists(workdir() / "small/dataset.csv")) return;
  write("small.json", R"({"per_class": 6, "T": 120, "d": 3})");
  REQUIRE(run_cli("synth --config small.json --out small") == 0);
  write("embed.json", R"({"input": {"format": "collection", "path": "small/dataset.csv",
    "labels": "small/labels.csv", "truth": "small/truth.csv"}, "encoder": "none",
    "normalize": false, "link": "identity", "d": 3, "iters": 64})");
}

} // namespace

TEST_CASE("config resolution") {
  const Json cfg = lrvi::cli::resolve_config("embed", Json{{"d", 7}}, Json{{"iters", 9}});
  CHECK(cfg.at("d") == 7);
  CHECK(cfg.at("iters") == 9);
  CHECK(cfg.at("input").at("cutoff") == 1000);
  CHECK_THROWS_AS(lrvi::cli::resolve_config("embed", Json{{"bogus", 1}}, Json()), lrvi::ConfigError);
  CHECK_THROWS_AS(lrvi::cli::resolve_config("embed", Json{{"input", {{"bogus", 1}}}}, Json()), lrvi::ConfigError);
  const Json manifest{{"command", "synth"}, {"version", "x"}, {"config", {{"seed", 4}}}};
  CHECK(lrvi::cli::resolve_config("synth", manifest, Json()).at("seed") == 4);
  CHECK_THROWS_AS(lrvi::cli::resolve_config("embed", manifest, Json()), lrvi::ConfigError);
}

TEST_CASE("synth with defaults writes a 15 x 900 truth matrix") {
  REQUIRE(run_cli("synth --out nested/dir/synth") == 0);
  const std::string truth = slurp("nested/dir/synth/truth.csv");
  CHECK(count_lines(truth) == 16);
  const std::string header = truth.substr(0, truth.find('\n'));
  CHECK(std::count(header.begin(), header.end(), ',') == 900);
  CHECK(count_lines(slurp("nested/dir/synth/labels.csv")) == 901);
  const Json m = Json::parse(slurp("nested/dir/synth/manifest.json"));
  CHECK(m.at("command") == "synth");
  CHECK(m.at("config").at("per_class") == 300);
}

TEST_CASE("exit codes") {
  write("unknown.json", R"({"not_a_key": 1})");
  CHECK(run_cli("synth --config unknown.json --out x") == 2);
  CHECK(run_cli("synth --config missing.json --out x") == 2);
  CHECK(run_cli("embed --lambda banana --out x") == 2);
  CHECK(run_cli("frobnicate") == 2);
  write("unstable.json", R"({"per_class": 3, "T": 60, "d": 3, "perturb_var": 400})");
  CHECK(run_cli("synth --config unstable.json --out unstable") == 3);
}

TEST_CASE("embed reruns are byte-identical and manifests replay") {
  ensure_small_benchmark();
  REQUIRE(run_cli("embed --config embed.json --out e1") == 0);
  REQUIRE(run_cli("embed --config embed.json --out e2") == 0);
  CHECK(slurp("e1/embedding.csv") == slurp("e2/embedding.csv"));
  CHECK(slurp("e1/history.csv") == slurp("e2/history.csv"));
  CHECK(slurp("e1/lambda_search.csv") == slurp("e2/lambda_search.csv"));

  REQUIRE(run_cli("embed --config e1/manifest.json --out e3") == 0);
  CHECK(slurp("e1/embedding.csv") == slurp("e3/embedding.csv"));

  const Json metrics = Json::parse(slurp("e1/metrics.json"));
  CHECK(metrics.contains("ari"));
  CHECK(metrics.at("approx_rank").get<int>() >= 1);
  CHECK(metrics.at("reconstruction_error").get<double>() > 0);
}

TEST_CASE("lambda inf and eval on an embedding") {
  ensure_small_benchmark();
  REQUIRE(run_cli("embed --config embed.json --lambda inf --out einf") == 0);
  CHECK(Json::parse(slurp("einf/metrics.json")).at("lambda") == "inf");
  CHECK(run_cli("embed --config embed.json --lambda search --out esearch") == 0);
  CHECK(fs::exists(workdir() / "esearch/lambda_search.csv"));

  write("eval.json", R"({"embeddings": "einf/embedding.csv"})");
  REQUIRE(run_cli("eval --config eval.json --out ev") == 0);
  const Json m = Json::parse(slurp("ev/metrics.json"));
  CHECK(m.at("ari").is_number());
  CHECK(m.at("nmi").get<double>() >= 0);
  CHECK(m.at("accuracy").is_null());
}

TEST_CASE("sweep resumes without recomputing finished rows") {
  ensure_small_benchmark();
  write("sweep.json", R"({"input": {"path": "small/dataset.csv", "labels": "small/labels.csv",
    "truth": "small/truth.csv"}, "encoder": "none", "normalize": false, "link": "identity", "d": 3,
    "iters": 64, "sweep": {"points": 4}})");
  REQUIRE(run_cli("sweep --config sweep.json --out w") == 0);
  const std::string full = slurp("w/sweep.csv");
  CHECK(count_lines(full) == 5);

  // Drop the last two rows and resume.
  std::size_t cut = full.size() - 1;
  for (int k = 0; k < 2; ++k) cut = full.rfind('\n', cut - 1);
  write("w/sweep.csv", full.substr(0, cut + 1));
  REQUIRE(run_cli("sweep --config sweep.json --out w") == 0);
  CHECK(slurp("w/sweep.csv") == full);
  REQUIRE(run_cli("sweep --config sweep.json --out w") == 0);
  CHECK(slurp("w/sweep.csv") == full);
}
