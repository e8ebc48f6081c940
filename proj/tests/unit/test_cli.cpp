#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#ifndef PDHJB_CLI_PATH
#define PDHJB_CLI_PATH "pdhjb"
#endif

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / "pdhjb_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
};

std::string write_config(const Workspace& ws, const std::string& name, const json& cfg) {
  const fs::path p = ws.dir / name;
  std::ofstream out(p);
  out << cfg.dump(2);
  return p.string();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PDHJB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

json small_value_config() {
  return json{{"model",
               {{"coefficients", {{"preset", "lq-1d"}}},
                {"horizon", 1.0},
                {"initial", {0.0}}}},
              {"numerics",
               {{"dt", 0.02}, {"n_paths", 300}, {"seed", 99}, {"regression", {{"degree", 2}}}}},
              {"task", {{"policy_class", {{"kind", "feedback"}, {"gains", {1.0}}}}}}};
}

json load_payload(const fs::path& out_dir) {
  std::ifstream in(out_dir / "envelope.json");
  REQUIRE(in.good());
  json env = json::parse(in);
  return env["payload"];
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("schema violations exit with code 2 and a pointer") {
  Workspace ws;
  json bad = small_value_config();
  bad["numerics"]["dt"] = 0.0003;  // does not divide the horizon
  const std::string cfg = write_config(ws, "bad.json", bad);
  CHECK(run_cli("value --config " + cfg + " --out " + (ws.dir / "o1").string()) == 2);

  json missing = small_value_config();
  missing["numerics"].erase("seed");
  CHECK(run_cli("value --config " + write_config(ws, "m.json", missing) + " --out " +
                (ws.dir / "o2").string()) == 2);

  json unknown = small_value_config();
  unknown["model"]["coefficients"]["preset"] = "no-such-preset";
  CHECK(run_cli("value --config " + write_config(ws, "u.json", unknown) + " --out " +
                (ws.dir / "o3").string()) == 2);
}

TEST_CASE("numeric refusals exit with code 3") {
  Workspace ws;
  json cfg = small_value_config();
  cfg["task"] = {{"extra_nodes", 6}, {"value_grid", {-0.5, 0.0, 0.5}}};
  CHECK(run_cli("bp-optimize --config " + write_config(ws, "r.json", cfg) + " --out " +
                (ws.dir / "o").string()) == 3);
}

TEST_CASE("payloads are byte-identical across reruns") {
  Workspace ws;
  const std::string cfg = write_config(ws, "v.json", small_value_config());
  const fs::path o1 = ws.dir / "a", o2 = ws.dir / "b";
  REQUIRE(run_cli("value --config " + cfg + " --out " + o1.string()) == 0);
  REQUIRE(run_cli("value --config " + cfg + " --out " + o2.string()) == 0);
  CHECK(load_payload(o1).dump() == load_payload(o2).dump());
}

TEST_CASE("seed override changes the envelope but stays reproducible") {
  Workspace ws;
  const std::string cfg = write_config(ws, "v.json", small_value_config());
  const fs::path o1 = ws.dir / "s1", o2 = ws.dir / "s2", o3 = ws.dir / "s3";
  REQUIRE(run_cli("value --config " + cfg + " --seed 123 --out " + o1.string()) == 0);
  REQUIRE(run_cli("value --config " + cfg + " --seed 123 --out " + o2.string()) == 0);
  REQUIRE(run_cli("value --config " + cfg + " --seed 124 --out " + o3.string()) == 0);
  CHECK(load_payload(o1).dump() == load_payload(o2).dump());
  CHECK(load_payload(o1).dump() != load_payload(o3).dump());
}

TEST_CASE("every envelope embeds the resolved configuration") {
  Workspace ws;
  json cfg = small_value_config();
  cfg["numerics"].erase("regression");  // default must appear resolved
  const std::string path = write_config(ws, "v.json", cfg);
  const fs::path out = ws.dir / "env";
  REQUIRE(run_cli("value --config " + path + " --out " + out.string()) == 0);
  std::ifstream in(out / "envelope.json");
  const json env = json::parse(in);
  CHECK(env["config"]["numerics"]["regression"]["degree"] == 3);
  CHECK(env["config"]["numerics"]["threads"].is_number());
  CHECK(env.contains("payload_hash"));
  CHECK(env.contains("model_hash"));
}

TEST_CASE("hjb-residual on the benchmark preset passes") {
  Workspace ws;
  json cfg = small_value_config();
  cfg["task"] = {{"t_points", 5}, {"x_points", 5}};
  const std::string path = write_config(ws, "h.json", cfg);
  CHECK(run_cli("hjb-residual --config " + path + " --out " + (ws.dir / "h").string()) == 0);
}

TEST_SUITE_END();
