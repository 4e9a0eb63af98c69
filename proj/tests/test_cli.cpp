#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  std::random_device rd;
  auto p = fs::temp_directory_path() / ("sspace_cli_" + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

Run cli(const std::string& args, const fs::path& dir) {
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = std::string("cd '") + dir.string() + "' && '" + SSPACE_CLI_PATH + "' " + args + " 2>'" +
                          err_path.string() + "'";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  for (std::size_t n; (n = fread(buf.data(), 1, buf.size(), pipe)) > 0;) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_file(err_path);
  return r;
}

}  // namespace

TEST_CASE("synth, delta and project from the command line") {
  const auto dir = scratch();
  REQUIRE(cli("synth --out fx --seed 2", dir).code == 0);
  REQUIRE(cli("delta --model fx/aligned.safetensors --base fx/base.safetensors --out dA.safetensors", dir).code == 0);
  const auto d = cli("delta --model fx/finetuned.safetensors --base fx/aligned.safetensors --out dT.safetensors "
                     "--report dT.json",
                     dir);
  REQUIRE(d.code == 0);
  CHECK(fs::exists(dir / "dT.csv"));
  const auto dj = nlohmann::json::parse(read_file(dir / "dT.json"));
  CHECK(dj["config"]["subcommand"] == "delta");

  const auto p = cli("project --subspace-source dA.safetensors --task-update dT.safetensors "
                     "--base fx/aligned.safetensors --rho 0.25 --mode topk --scheme parallel --out p.safetensors "
                     "--report p.json",
                     dir);
  REQUIRE(p.code == 0);
  const auto pj = nlohmann::json::parse(read_file(dir / "p.json"));
  CHECK(std::abs(pj["runs"][0]["global_energy"].get<double>() - 0.7) < 1e-8);
  CHECK(pj["config"]["rho"][0] == 0.25);

  const auto g = cli("project --subspace-source dA.safetensors --task-update dT.safetensors "
                     "--base fx/aligned.safetensors --mode random --seed 4 --scheme orthogonal --out g.safetensors",
                     dir);
  REQUIRE(g.code == 0);
  for (const char* rho : {"0.01", "0.25", "0.5", "0.75", "0.99"})
    CHECK(fs::exists(dir / ("g.rho" + std::string(rho) + ".safetensors")));
  CHECK(nlohmann::json::parse(g.out)["runs"].size() == 5);

  const auto e = cli("energy --subspace-source dA.safetensors --task-update dT.safetensors --rho-grid 0.25:1:0.25",
                     dir);
  REQUIRE(e.code == 0);
  CHECK(nlohmann::json::parse(e.out)["runs"].size() == 4);

  const std::string grid_args = "project --subspace-source dA.safetensors --task-update dT.safetensors "
                                "--base fx/aligned.safetensors --mode randomk --seed 9 --rho 0.5 ";
  REQUIRE(cli(grid_args + "--threads 1 --out t1.safetensors --report t1.json", dir).code == 0);
  REQUIRE(cli(grid_args + "--threads 8 --out t8.safetensors --report t8.json", dir).code == 0);
  CHECK(read_file(dir / "t1.safetensors") == read_file(dir / "t8.safetensors"));
  auto t1 = nlohmann::json::parse(read_file(dir / "t1.json"));
  auto t8 = nlohmann::json::parse(read_file(dir / "t8.json"));
  CHECK(t1["runs"] == t8["runs"]);

  const auto m = cli("mso --a dA.safetensors --b dA.safetensors --eta-grid 0.5,0.9", dir);
  REQUIRE(m.code == 0);
  for (const auto& row : nlohmann::json::parse(m.out)["rows"]) CHECK(row["mso"] == 1.0);
  fs::remove_all(dir);
}

TEST_CASE("act-mso and activation fixtures") {
  const auto dir = scratch();
  REQUIRE(cli("synth --kind activations --planted --out act --layer-count 6 --n 120 --d 48", dir).code == 0);
  const auto r = cli("act-mso --a act/a.safetensors --b act/b.safetensors --eta-grid 0.1,0.3 --report r.json", dir);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(read_file(dir / "r.json"));
  CHECK(j["band"][0]["mean_mso"].get<double>() >= 0.95);
  CHECK(read_file(dir / "r.csv").rfind("layer,depth_pct,eta,k_a,k_b,d,mso,baseline\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("failures exit nonzero with one JSON line on stderr") {
  const auto dir = scratch();
  REQUIRE(cli("synth --out fx", dir).code == 0);

  auto expect_error = [&](const std::string& args, int code, const std::string& kind) {
    const auto r = cli(args, dir);
    CHECK(r.code == code);
    REQUIRE(!r.err.empty());
    CHECK(r.err.find('\n') == r.err.size() - 1);
    const auto j = nlohmann::json::parse(r.err);
    CHECK(j["error"] == kind);
    CHECK(j["exit"] == code);
  };
  expect_error("project --subspace-source x --task-update y --base z --rho 0 --out q", 2, "usage");
  expect_error("delta --model fx/base.safetensors --base missing.safetensors --out q.safetensors", 3, "io");
  expect_error("frobnicate", 2, "usage");
  expect_error("energy --subspace-source fx/base.safetensors --task-update fx/base.safetensors --rho-grid 0.5,0.4", 2,
               "usage");
  {
    std::ofstream junk(dir / "junk.safetensors", std::ios::binary);
    junk << "not a container at all";
  }
  expect_error("delta --model junk.safetensors --base fx/base.safetensors --out q.safetensors", 3, "format");
  expect_error("mso --a fx/base.safetensors", 2, "usage");
  fs::remove_all(dir);
}
