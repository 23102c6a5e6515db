#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(FASTOT_TEST_WORKDIR) / "cli";

int run(const std::string& args) {
  const std::string cmd = std::string(FASTOT_CLI) + " " + args + " > " +
                          (kWork / "stdout.txt").string() + " 2> " + (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string grid_csv(int n, double shift) {
  std::ostringstream s;
  for (int i = 0; i < n; ++i) s << (i % 3) + shift << ',' << (i / 3) * 0.5 << '\n';
  return s.str();
}

struct Setup {
  Setup() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Setup, "solve with identical files gives zero cost") {
  write(kWork / "a.csv", grid_csv(10, 0.0));
  REQUIRE(run("solve --source " + (kWork / "a.csv").string() + " --target " +
              (kWork / "a.csv").string() + " --method dual --out " + (kWork / "s.json").string()) == 0);
  const auto j = nlohmann::json::parse(slurp(kWork / "s.json"));
  CHECK(j["primal_cost"].get<double>() <= 1e-9);
  CHECK(j["n_source"] == 10);
  CHECK(j.contains("peak_state_bytes"));
}

TEST_CASE_FIXTURE(Setup, "dual and exact methods agree on 8-point files") {
  write(kWork / "a.csv", grid_csv(8, 0.0));
  write(kWork / "b.csv", "x0,x1,mass\n0,2,0.1\n1,2,0.2\n2,3,0.1\n0.5,0,0.1\n3,1,0.1\n2,2,0.2\n1,1,0.1\n0,0,0.1\n");
  const std::string io = " --source " + (kWork / "a.csv").string() + " --target " + (kWork / "b.csv").string();
  REQUIRE(run("solve" + io + " --method dual --out " + (kWork / "d.json").string()) == 0);
  REQUIRE(run("solve" + io + " --method exact --out " + (kWork / "e.json").string()) == 0);
  const double d = nlohmann::json::parse(slurp(kWork / "d.json"))["primal_cost"].get<double>();
  const double e = nlohmann::json::parse(slurp(kWork / "e.json"))["primal_cost"].get<double>();
  CHECK(std::abs(d - e) / e <= 1e-6);
}

TEST_CASE_FIXTURE(Setup, "exact method above the dense cap exits 3") {
  write(kWork / "big.csv", grid_csv(2000, 0.0));
  CHECK(run("solve --source " + (kWork / "big.csv").string() + " --target " +
            (kWork / "big.csv").string() + " --method exact --out " + (kWork / "x.json").string()) == 3);
  CHECK(slurp(kWork / "stderr.txt").find("cap") != std::string::npos);
}

TEST_CASE_FIXTURE(Setup, "input errors exit 2") {
  write(kWork / "bad.csv", "0,0\n1,oops\n");
  write(kWork / "a.csv", grid_csv(4, 0.0));
  CHECK(run("solve --source " + (kWork / "bad.csv").string() + " --target " +
            (kWork / "a.csv").string() + " --out " + (kWork / "x.json").string()) == 2);
  CHECK(slurp(kWork / "stderr.txt").find("bad.csv:2") != std::string::npos);
  CHECK(run("solve --source " + (kWork / "missing.csv").string() + " --target " +
            (kWork / "a.csv").string() + " --out " + (kWork / "x.json").string()) == 2);
  CHECK(run("solve --bogus-flag") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("morph --source hexagon:5 --out " + (kWork / "m").string()) == 2);
}

TEST_CASE_FIXTURE(Setup, "help and version") {
  CHECK(run("--help") == 0);
  CHECK(slurp(kWork / "stdout.txt").find("solve") != std::string::npos);
  CHECK(run("--version") == 0);
  CHECK(!slurp(kWork / "stdout.txt").empty());
}

TEST_CASE_FIXTURE(Setup, "morph writes one file per frame") {
  REQUIRE(run("morph --source circle:16 --target square:16 --frames 5 --out " + (kWork / "m").string()) == 0);
  const double ts[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int k = 0; k < 5; ++k) {
    const auto text = slurp(kWork / "m" / ("frame_000" + std::to_string(k) + ".csv"));
    REQUIRE(text.rfind("t,x,y,mass\n", 0) == 0);
    const auto line = text.substr(11, text.find(',', 11) - 11);
    CHECK(std::stod(line) == ts[k]);
  }
  CHECK_FALSE(fs::exists(kWork / "m" / "frame_0005.csv"));
}

TEST_CASE_FIXTURE(Setup, "bench rows for n = 1 agree across methods") {
  REQUIRE(run("bench --sizes 1 --out " + (kWork / "b.csv").string()) == 0);
  std::istringstream in(slurp(kWork / "b.csv"));
  std::string header, dual, dense;
  std::getline(in, header);
  std::getline(in, dual);
  std::getline(in, dense);
  CHECK(header == "n,method,peak_bytes,wall_ms,cost,status");
  auto cost = [](const std::string& row) {
    std::istringstream r(row);
    std::string f;
    for (int k = 0; k < 5; ++k) std::getline(r, f, ',');
    return f;
  };
  CHECK(dual.rfind("1,dual,", 0) == 0);
  CHECK(dense.rfind("1,dense,", 0) == 0);
  CHECK(cost(dual) == cost(dense));
  CHECK(cost(dual) == "5");
}

TEST_CASE_FIXTURE(Setup, "adapt writes one row per mode and seed") {
  REQUIRE(run("adapt --mode plain,full --seed 1..2 --out " + (kWork / "a.csv").string()) == 0);
  std::istringstream in(slurp(kWork / "a.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
}
