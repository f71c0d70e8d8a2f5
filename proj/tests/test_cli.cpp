#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mci/cli.hpp"
#include "mci/model.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = mci::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

json report_of(const Run& r) {
  REQUIRE_MESSAGE(r.code == 0, r.err);
  return json::parse(r.out);
}

fs::path tmp_dir() {
  const fs::path dir = fs::path(MCI_TEST_TMPDIR) / "cli";
  fs::create_directories(dir);
  return dir;
}

// Tiny training setup so the CLI tests stay fast.
std::vector<std::string> small_train(std::vector<std::string> head, const char* per_class = "6",
                                     const char* pretrain = "20", const char* adapt = "3") {
  for (const char* a : {"--synthetic", "shifted-blobs", "--per-class", per_class, "--hidden", "8",
                        "--feature-dim", "4", "--pretrain-epochs", pretrain, "--adapt-epochs", adapt,
                        "--lr", "0.01", "--epsilon", "1e-3"}) {
    head.emplace_back(a);
  }
  return head;
}

std::string without_wall_time(const std::string& text) {
  json j = json::parse(text);
  j.erase("wall_time_seconds");
  return j.dump();
}

}  // namespace

TEST_CASE("measure cond with permutations reports statistic and p-value") {
  const json r = report_of(
      run({"measure", "--synthetic", "chain-ci", "--stat", "cond", "--permutations", "20", "--per-class", "40"}));
  CHECK(r["command"] == "measure");
  CHECK(r["results"]["statistic"].is_number());
  CHECK(r["results"]["p_value"].is_number());
  CHECK(r["results"]["permutations"] == 20);
  CHECK(r.contains("wall_time_seconds"));
  CHECK(r["config"]["data"]["scenario"] == "chain-ci");
}

TEST_CASE("measure cond accepts the shared extended bandwidth") {
  const json r = report_of(run({"measure", "--synthetic", "chain-ci", "--stat", "cond", "--per-class", "20",
                                "--bandwidth", "shared"}));
  CHECK(r["config"]["bandwidth"] == "shared");
  CHECK(r["results"]["statistic"].get<double>() >= 0.0);
  CHECK(run({"measure", "--synthetic", "chain-ci", "--bandwidth", "joint"}).code == mci::kExitUsage);
}

TEST_CASE("measure every statistic on a feature file") {
  const fs::path file = tmp_dir() / "blobs.csv";
  REQUIRE(run({"generate", "--synthetic", "shifted-blobs", "--per-class", "10", "--out", file.string()}).code == 0);
  for (const std::string stat : {"nocco", "cond", "per-class-nocco", "mmd", "a-distance"}) {
    const json r = report_of(run({"measure", "--input", file.string(), "--stat", stat, "--epsilon", "1e-4"}));
    CHECK(r["results"]["statistic"].get<double>() >= (stat == "a-distance" ? -2.0 : 0.0));
  }
}

TEST_CASE("measure usage errors exit 2, data errors exit 1") {
  CHECK(run({"measure", "--synthetic", "chain-ci", "--stat", "foo"}).code == mci::kExitUsage);
  CHECK(run({"measure", "--stat", "cond"}).code == mci::kExitUsage);
  CHECK(run({"measure", "--synthetic", "chain-ci", "--stat", "mmd", "--permutations", "5"}).code ==
        mci::kExitUsage);
  CHECK(run({"measure", "--synthetic", "chain-ci", "--epsilon", "0"}).code == mci::kExitUsage);
  CHECK(run({"bogus"}).code == mci::kExitUsage);
  CHECK(run({}).code == mci::kExitUsage);
  const Run missing = run({"measure", "--input", (tmp_dir() / "nope.csv").string(), "--stat", "nocco"});
  CHECK(missing.code == mci::kExitDataError);
  CHECK(missing.err.find("nope.csv") != std::string::npos);

  const fs::path unlabeled = tmp_dir() / "unlabeled.csv";
  std::ofstream(unlabeled) << "f0,label,domain\n0,0,0\n1,1,0\n5,-1,1\n6,-1,1\n";
  CHECK(run({"measure", "--input", unlabeled.string(), "--stat", "cond"}).code == mci::kExitDataError);
  CHECK(run({"measure", "--input", unlabeled.string(), "--stat", "nocco"}).code == mci::kExitOk);
}

TEST_CASE("train reports mean, stderr and paired baseline deltas") {
  const json r = report_of(run(small_train({"train", "--trials", "3", "--baseline"})));
  const json& res = r["results"];
  CHECK(res["trials"].size() == 3);
  CHECK(res["mean_target_accuracy"].is_number());
  CHECK(res["stderr_target_accuracy"].is_number());
  CHECK(res["baseline"]["mean_delta"].is_number());
  CHECK(res["trials"][1]["seed"] == 1);
  for (const auto& t : res["trials"]) {
    CHECK(t["delta_vs_baseline"].get<double>() ==
          doctest::Approx(t["target_accuracy"].get<double>() - t["baseline_target_accuracy"].get<double>()));
  }
}

TEST_CASE("train is reproducible byte for byte apart from wall time") {
  const Run a = run(small_train({"train", "--trials", "1", "--seed", "7"}));
  const Run b = run(small_train({"train", "--trials", "1", "--seed", "7"}));
  REQUIRE(a.code == 0);
  CHECK(without_wall_time(a.out) == without_wall_time(b.out));
  const json r = json::parse(a.out);
  CHECK(r["seed"] == 7);
  CHECK(r["config"]["train"]["seed"] == 7);
}

TEST_CASE("beta1 = beta2 = 0 matches the baseline field exactly") {
  const json r = report_of(run(small_train({"train", "--beta1", "0", "--beta2", "0", "--baseline"})));
  const json& t = r["results"]["trials"][0];
  CHECK(t["target_accuracy"].get<double>() == t["baseline_target_accuracy"].get<double>());
  CHECK(t["delta_vs_baseline"].get<double>() == 0.0);
}

TEST_CASE("train saves a loadable model and honours --out and the report directory variable") {
  const fs::path model = tmp_dir() / "model.txt";
  const fs::path report = tmp_dir() / "sub" / "train.json";
  const Run r = run(small_train({"train", "--model-out", model.string(), "--out", report.string()}));
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(mci::load_model(model.string()).shape().hidden_dim == 8);
  std::ifstream in(report);
  CHECK(json::parse(in)["command"] == "train");

  const fs::path dir = tmp_dir() / "reports";
  setenv(mci::kReportDirEnv, dir.string().c_str(), 1);
  const Run env = run({"measure", "--synthetic", "chain-dep", "--per-class", "20"});
  unsetenv(mci::kReportDirEnv);
  REQUIRE(env.code == 0);
  CHECK(env.out.empty());
  CHECK(fs::exists(dir / "measure-report.json"));
}

TEST_CASE("sweep covers the full grid in sorted order") {
  const json r = report_of(run(small_train({"sweep"}, "4", "2", "1")));
  const json& rows = r["results"]["rows"];
  CHECK(rows.size() == 30);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto key = [&](std::size_t k) {
      return std::make_pair(rows[k]["beta1"].get<double>(), rows[k]["beta2"].get<double>());
    };
    CHECK(key(i - 1) < key(i));
  }
  CHECK(rows[0]["beta1"].get<double>() == 1e-4);
  CHECK(rows[0]["beta2"].get<double>() == 5e-6);
}

TEST_CASE("a one-cell sweep reproduces the single training run") {
  const json t = report_of(run(small_train({"train", "--beta1", "0.5", "--beta2", "0.05", "--seed", "3"})));
  const json s = report_of(
      run(small_train({"sweep", "--beta1-grid", "0.5", "--beta2-grid", "0.05", "--seed", "3"})));
  REQUIRE(s["results"]["rows"].size() == 1);
  CHECK(s["results"]["rows"][0]["mean_target_accuracy"].get<double>() ==
        t["results"]["trials"][0]["target_accuracy"].get<double>());
}

TEST_CASE("sweep with an empty grid is a usage error") {
  CHECK(run(small_train({"sweep", "--beta1-grid", ""})).code == mci::kExitUsage);
  CHECK(run(small_train({"sweep", "--beta2-grid", "a,b"})).code == mci::kExitUsage);
}
