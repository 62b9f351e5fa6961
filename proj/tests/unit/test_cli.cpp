#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "exvqa/checkpoint.hpp"
#include "exvqa/cli.hpp"
#include "exvqa/dataset.hpp"
#include "exvqa/metrics.hpp"
#include "exvqa/tensor_file.hpp"
#include "exvqa/toy.hpp"
#include "test_util.hpp"

using namespace exvqa;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  const auto b = io::read_file(p);
  return {b.begin(), b.end()};
}

struct Workspace {
  testing::TempDir dir;
  toy::ToyFiles files = toy::write_memorization_set(dir.path() / "toy", 0);
  std::string ds = files.dataset.string(), kb = files.knowledge.string();
  std::string at(const char* name) const { return (dir / name).string(); }

  void vocab() {
    auto r = invoke({"build-vocab", "--preset", "toy", "--quiet", "--dataset", ds, "--knowledge-base", kb, "--vocab",
                  at("vocab.txt")});
    REQUIRE(r.code == 0);
  }
  Result train(const std::string& ckpt, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"train", "--preset", "toy", "--quiet", "--dataset", ds, "--knowledge-base", kb,
                               "--vocab", at("vocab.txt"), "--checkpoint", ckpt, "--max-steps", "3"};
    a.insert(a.end(), extra.begin(), extra.end());
    return invoke(a);
  }
};

}  // namespace

TEST_CASE("usage errors exit 2 with one machine-readable line") {
  auto r = invoke({});
  CHECK(r.code == 2);
  r = invoke({"train", "--no-such-flag"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: usage: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  r = invoke({"frobnicate"});
  CHECK(r.code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("config violations name the field") {
  auto r = invoke({"train", "--batch-size", "0"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: config: ", 0) == 0);
  CHECK(r.err.find("'batch_size'") != std::string::npos);
  r = invoke({"train", "--d", "abc"});
  CHECK(r.err.find("'d'") != std::string::npos);
  r = invoke({"train", "--preset", "toy"});
  CHECK(r.code == 1);
  CHECK(r.err.find("'vocab' is required") != std::string::npos);
}

TEST_CASE("config file and flag precedence") {
  testing::TempDir dir;
  auto cfg = dir.write("c.json", R"({"batch_size": 0})");
  // The flag overrides the invalid file value.
  auto r = invoke({"train", "--config", cfg.string(), "--batch-size", "4"});
  CHECK(r.err.find("'batch_size'") == std::string::npos);
  r = invoke({"train", "--config", cfg.string()});
  CHECK(r.err.find("'batch_size'") != std::string::npos);
  auto bad = dir.write("bad.json", R"({"mystery": 1})");
  r = invoke({"train", "--config", bad.string()});
  CHECK(r.err.find("'mystery'") != std::string::npos);
}

TEST_CASE("evaluate on identity predictions reports BLEU-4 = 100") {
  testing::TempDir dir;
  const std::string ds = std::string(EXVQA_FIXTURE_DIR) + "/metrics_golden/dataset.jsonl";
  std::string preds;
  for (const auto& inst : data::load_dataset(ds)) {
    metrics::Prediction p{inst.id, inst.target(), inst.answer, inst.explanation};
    preds += metrics::prediction_line(p) + "\n";
  }
  auto pf = dir.write("p.jsonl", preds);
  auto r = invoke({"evaluate", "--quiet", "--dataset", ds, "--predictions", pf.string(), "--report",
                (dir / "r.json").string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "r.json"));
  CHECK(j["bleu"][3].get<double>() == doctest::Approx(100.0));
  CHECK(j["accuracy"].get<double>() == 100.0);
  CHECK(j["spice"].is_null());
  CHECK(j["label"] == "full");
  CHECK(j.contains("config"));
  CHECK(slurp(dir / "r.json.txt").find("full") != std::string::npos);
}

TEST_CASE("retrieve lists exactly P knowledge ids per instance") {
  Workspace w;
  w.vocab();
  auto r = invoke({"index", "--preset", "toy", "--quiet", "--vocab", w.at("vocab.txt"), "--knowledge-base", w.kb,
                "--index", w.at("kb.idx")});
  REQUIRE(r.code == 0);
  r = invoke({"retrieve", "--preset", "toy", "--quiet", "--vocab", w.at("vocab.txt"), "--dataset", w.ds, "--index",
           w.at("kb.idx"), "--retrieval-cache", w.at("ret.jsonl")});
  REQUIRE(r.code == 0);
  std::istringstream lines(slurp(w.at("ret.jsonl")));
  std::string line;
  std::getline(lines, line);
  CHECK(json::parse(line).contains("config"));
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    CHECK(j["knowledge"].size() == 3);
    CHECK(j["scores"].size() == 3);
    ++n;
  }
  CHECK(n == 16);
  // The index file carries the config echo.
  bool has_meta = false;
  for (const auto& t : io::read_tensor_file(w.at("kb.idx"))) has_meta = has_meta || t.name == "meta.config";
  CHECK(has_meta);
  // A different knowledge base makes the index stale.
  auto other = w.dir.write("kb2.jsonl", "{\"id\": \"z\", \"text\": \"something else\"}\n");
  r = invoke({"retrieve", "--preset", "toy", "--quiet", "--vocab", w.at("vocab.txt"), "--dataset", w.ds, "--index",
           w.at("kb.idx"), "--knowledge-base", other.string(), "--retrieval-cache", w.at("ret2.jsonl")});
  CHECK(r.err.rfind("error: stale_index: ", 0) == 0);
}

TEST_CASE("train is byte-deterministic and echoes its config") {
  Workspace w;
  w.vocab();
  REQUIRE(w.train(w.at("a.bin")).code == 0);
  REQUIRE(w.train(w.at("b.bin")).code == 0);
  CHECK(slurp(w.at("a.bin")) == slurp(w.at("b.bin")));
  REQUIRE(w.train(w.at("c.bin"), {"--seed", "1"}).code == 0);
  CHECK(slurp(w.at("a.bin")) != slurp(w.at("c.bin")));
  const auto ck = io::load_checkpoint(w.at("a.bin"));
  CHECK(json::parse(ck.config_json)["max_steps"] == 3);
}

TEST_CASE("generate and evaluate run on an ablated checkpoint") {
  Workspace w;
  w.vocab();
  REQUIRE(w.train(w.at("nc.bin"), {"--no-captions"}).code == 0);
  auto r = invoke({"generate", "--quiet", "--vocab", w.at("vocab.txt"), "--dataset", w.ds, "--knowledge-base", w.kb,
                "--checkpoint", w.at("nc.bin"), "--predictions", w.at("nc.jsonl"), "--max-len", "8"});
  REQUIRE(r.code == 0);
  // The generate run picked up the toy shape and the ablation from the checkpoint.
  const json head = json::parse(slurp(w.at("nc.jsonl")).substr(0, slurp(w.at("nc.jsonl")).find('\n')));
  CHECK(head["config"]["no_captions"] == true);
  CHECK(head["config"]["d"] == 32);
  r = invoke({"evaluate", "--quiet", "--dataset", w.ds, "--predictions", w.at("nc.jsonl"), "--report",
           w.at("nc.json"), "--row", "again=" + w.at("nc.jsonl")});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(w.at("nc.json")));
  CHECK(j["label"] == "w/o C");
  CHECK(j["rows"].size() == 2);
  CHECK(r.out.find("w/o C") != std::string::npos);
  r = invoke({"evaluate", "--quiet", "--dataset", w.ds, "--predictions", w.at("nc.jsonl"), "--report",
           w.at("x.json"), "--row", "broken"});
  CHECK(r.code == 2);
}

TEST_CASE("relative paths resolve against the run directory variable") {
  Workspace w;
  ::setenv(cli::kRunDirEnv, w.dir.path().c_str(), 1);
  auto r = invoke({"build-vocab", "--quiet", "--dataset", "toy/dataset.jsonl", "--vocab", "v.txt"});
  ::unsetenv(cli::kRunDirEnv);
  CHECK(r.code == 0);
  CHECK(std::filesystem::exists(w.dir / "v.txt"));
  CHECK(std::filesystem::exists(w.dir / "v.txt.meta.json"));
}
