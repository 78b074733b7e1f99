#include "doctest.h"
#include "helpers.hpp"

#include "tignn/io.hpp"
#include "tignn/presets.hpp"
#include "tignn/session.hpp"
#include "tignn/training.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace tignn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + TIGNN_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Toy dataset plus a short training config, shared across cases.
struct ToyRun {
  fs::path dir;
  fs::path config;
  ToyRun() {
    dir = testing::scratch_dir("cli_toy");
    config = dir / "config.json";
    io::write_json_atomic(config.string(), json{{"preset", "toy"}, {"train", {{"epochs", 20}}}}, 2);
  }
};

const ToyRun& toy() {
  static const ToyRun t;
  return t;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage and config errors exit 2") {
  auto dir = testing::scratch_dir("cli_usage");
  CHECK(cli("", dir).code == 2);
  CHECK(cli("frobnicate", dir).code == 2);
  CHECK(cli("datagen --preset nonsense --out " + q(dir), dir).code == 2);
  CHECK(cli("serve --out " + q(dir), dir).code == 2);

  io::write_json_atomic((dir / "bad.json").string(), json{{"preset", "toy"}, {"data", {{"nt", 0}}}}, 2);
  CHECK(cli("datagen --config " + q(dir / "bad.json") + " --out " + q(dir), dir).code == 2);
  CHECK(cli("--version", dir).code == 0);
}

TEST_CASE("missing inputs exit 4") {
  auto dir = testing::scratch_dir("cli_missing");
  CHECK(cli("train --data " + q(dir / "nope.json") + " --out " + q(dir), dir).code == 4);
  CHECK(cli("datagen --config " + q(dir / "nope.json") + " --out " + q(dir), dir).code == 4);
  std::ofstream(dir / "broken.json") << "{\"schema\": ";
  CHECK(cli("train --data " + q(dir / "broken.json") + " --out " + q(dir), dir).code != 0);
}

TEST_CASE("toy datagen, train, eval") {
  const auto& t = toy();
  auto data = t.dir / "data";
  REQUIRE(cli("datagen --config " + q(t.config) + " --seed 3 --out " + q(data), t.dir).code == 0);
  CHECK(fs::exists(data / "dataset.json"));
  CHECK(fs::exists(data / "mesh.json"));
  auto manifest = io::read_json((data / "datagen.manifest.json").string());
  CHECK(manifest["schema"] == "manifest/1");
  CHECK(manifest["seed"] == 3);

  auto again = t.dir / "data2";
  REQUIRE(cli("datagen --config " + q(t.config) + " --seed 3 --out " + q(again), t.dir).code == 0);
  CHECK(slurp(data / "dataset.json") == slurp(again / "dataset.json"));

  auto m1 = t.dir / "m1", m2 = t.dir / "m2", m3 = t.dir / "m3";
  const std::string train = "train --config " + q(t.config) + " --data " + q(data / "dataset.json");
  REQUIRE(cli(train + " --seed 5 --out " + q(m1), t.dir).code == 0);
  REQUIRE(cli(train + " --seed 5 --out " + q(m2), t.dir).code == 0);
  REQUIRE(cli(train + " --seed 6 --out " + q(m3), t.dir).code == 0);
  CHECK(slurp(m1 / "checkpoint.json") == slurp(m2 / "checkpoint.json"));
  CHECK(slurp(m1 / "checkpoint.json") != slurp(m3 / "checkpoint.json"));
  const std::string loss = slurp(m1 / "loss.csv");
  CHECK(loss.rfind("epoch,", 0) == 0);
  CHECK(std::count(loss.begin(), loss.end(), '\n') == 21);

  auto ev = t.dir / "eval";
  auto r = cli("eval --checkpoint " + q(m1 / "checkpoint.json") + " --data " + q(data / "dataset.json") + " --out " +
                   q(ev),
               t.dir);
  REQUIRE(r.code == 0);
  CHECK(r.out == slurp(ev / "errors.csv"));
  CHECK(r.out.rfind("variable,split,lw,lq,med,uq,uw,n,excluded\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 7);
  auto em = io::read_json((ev / "eval.manifest.json").string());
  CHECK(em["degeneracy_rms"]["test"].get<double>() >= 0);

  auto frames = t.dir / "frames";
  REQUIRE(cli("render --checkpoint " + q(m1 / "checkpoint.json") + " --data " + q(data / "dataset.json") +
                  " --size 32 --out " + q(frames),
              t.dir)
              .code == 0);
  CHECK(fs::exists(frames / "frame_000.ppm"));
  CHECK(slurp(frames / "frame_000.ppm").rfind("P6\n32 32\n255\n", 0) == 0);
}

TEST_CASE("diverging rollout exits 3") {
  const auto& t = toy();
  auto dir = t.dir / "diverge";
  auto data = t.dir / "data";
  if (!fs::exists(data / "dataset.json"))
    REQUIRE(cli("datagen --config " + q(t.config) + " --seed 3 --out " + q(data), t.dir).code == 0);
  const auto ds = fem::load_dataset((data / "dataset.json").string());
  Checkpoint c;
  c.model = TignnModel(ModelConfig{8, 1, 2, 4});
  c.stats = normalization_stats(ds.mesh, ds.train);
  for (auto* head : {&c.model.dE_head, &c.model.dS_head, &c.model.l_head, &c.model.m_head})
    for (auto* p : head->parameters()) p->value.array() += 1e300;
  fs::create_directories(dir);
  save_checkpoint(c, (dir / "huge.json").string());
  auto r = cli("eval --checkpoint " + q(dir / "huge.json") + " --data " + q(data / "dataset.json") + " --out " + q(dir),
               dir);
  CHECK(r.code == 3);
}

TEST_CASE("serve --replay matches the in-process digest") {
  auto dir = testing::scratch_dir("cli_replay");
  const auto mesh = mesh_from_spec("beam:10,10,40,2,2,8");
  std::vector<Trajectory> trajs{testing::short_trajectory(mesh, 80, 3)};
  Checkpoint c;
  c.model = TignnModel(ModelConfig{8, 1, 2, 9});
  c.stats = normalization_stats(mesh, trajs);
  const auto ckpt = (dir / "ckpt.json").string();
  save_checkpoint(c, ckpt);

  ReplayScript script;
  script.ticks = 12;
  script.events.push_back({1, json{{"type", "poke"}, {"schema", "wire/1"}, {"ndc_xy", {0.0, 0.1}}}});
  script.events.push_back({4, json{{"type", "zap"}, {"schema", "wire/1"}}});
  io::write_json_atomic((dir / "script.json").string(), to_json(script), 2);

  Session s(two_beam_scene(ckpt));
  const auto expect = replay(s, script);

  auto out = dir / "out";
  auto r = cli("serve --checkpoint " + q(ckpt) + " --replay " + q(dir / "script.json") + " --out " + q(out), dir);
  REQUIRE(r.code == 0);
  CHECK(r.out == io::hex64(expect.digest) + "\n");
  std::string stream;
  for (const auto& line : expect.stream) stream += line + "\n";
  CHECK(slurp(out / "stream.jsonl") == stream);
}

}  // TEST_SUITE
