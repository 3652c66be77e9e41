#include "kwrec/text_io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <map>
#include <sstream>
#include <filesystem>
#include <fstream>
#include <string>

TEST_SUITE_BEGIN("cli");

namespace {

namespace fs = std::filesystem;

struct Workdir {
  fs::path dir;
  Workdir() {
    dir = fs::temp_directory_path() /
          ("kwrec_cli_" + std::to_string(std::rand()));
    fs::create_directories(dir);
  }
  ~Workdir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string path(const std::string& name) const {
    return (dir / name).string();
  }
};

int run_cli(const std::string& args) {
  const std::string command =
      std::string(KWREC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("pipeline: gen-data, cluster, train, recommend, benchmark") {
  Workdir w;
  // 60 keywords over 2 ad groups: 24 candidates each, divisible by n=3.
  CHECK(run_cli("gen-data --seed 5 --num-keywords 60 --num-topics 3 "
                "--embedding-dim 6 --num-adgroups 2 --out " +
                w.path("data.jsonl")) == 0);
  CHECK(run_cli("cluster --input " + w.path("data.jsonl") +
                " --k 8 --max-iters 50 --seed 5 --out " +
                w.path("clusters.jsonl")) == 0);
  CHECK(run_cli("train --data " + w.path("data.jsonl") + " --clusters " +
                w.path("clusters.jsonl") +
                " --iterations 20 --batch 4 --cluster-size 3 --output-size 6 "
                "--seed 5 --no-timing --checkpoint-out " +
                w.path("model.jsonl") + " --metrics-out " +
                w.path("metrics.csv")) == 0);
  CHECK(run_cli("recommend --data " + w.path("data.jsonl") + " --clusters " +
                w.path("clusters.jsonl") + " --checkpoint " +
                w.path("model.jsonl") + " --out " + w.path("rec.csv")) == 0);
  CHECK(run_cli("benchmark --data " + w.path("data.jsonl") + " --clusters " +
                w.path("clusters.jsonl") + " --checkpoint " +
                w.path("model.jsonl") +
                " --methods random,rb,pb,ip,drl --seed 5 --no-timing --out " +
                w.path("bench.csv")) == 0);

  const std::string metrics = slurp(w.path("metrics.csv"));
  CHECK(metrics.rfind("iter,mean_reward,critic_loss,adv_sd,wall_ms\n", 0) == 0);
  const std::string bench = slurp(w.path("bench.csv"));
  CHECK(bench.rfind("method,adgroup,impressions,spend,n_nonzero_keywords,"
                    "runtime_ms\n",
                    0) == 0);
  CHECK(bench.find("drl,mean,") != std::string::npos);
  const std::string rec = slurp(w.path("rec.csv"));
  CHECK(rec.rfind("adgroup,step,cluster,keyword\n", 0) == 0);
}

TEST_CASE("benchmark: the exhaustive oracle dominates every method") {
  Workdir w;
  REQUIRE(run_cli("gen-data --seed 11 --num-keywords 40 --num-topics 3 "
                  "--embedding-dim 6 --num-adgroups 2 --out " +
                  w.path("data.jsonl")) == 0);
  // 16 candidates per group, K=4: C(16,4) subsets are cheap to enumerate.
  REQUIRE(run_cli("benchmark --data " + w.path("data.jsonl") +
                  " --methods random,pb,ip,brute --output-size 4 --seed 11 "
                  "--no-timing --out " +
                  w.path("bench.csv")) == 0);
  const std::string bench = slurp(w.path("bench.csv"));
  std::map<std::string, std::map<std::string, double>> impressions;
  std::istringstream in(bench);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    const std::string method = line.substr(0, c1);
    const std::string adgroup = line.substr(c1 + 1, c2 - c1 - 1);
    if (adgroup == "mean") continue;
    impressions[adgroup][method] =
        std::stod(line.substr(c2 + 1, c3 - c2 - 1));
  }
  REQUIRE(impressions.size() == 1);  // the 20% test split of 2 groups
  for (const auto& [adgroup, by_method] : impressions) {
    REQUIRE(by_method.count("brute") == 1);
    const double oracle = by_method.at("brute");
    for (const auto& [method, value] : by_method) {
      CAPTURE(method);
      CHECK(value <= oracle + 1e-9);
    }
  }
}

TEST_CASE("sweep: cluster sizes trade decode time against reward") {
  Workdir w;
  REQUIRE(run_cli("gen-data --seed 3 --num-keywords 60 --num-topics 3 "
                  "--embedding-dim 6 --num-adgroups 2 --out " +
                  w.path("data.jsonl")) == 0);
  // 24 candidates per ad group; sizes 1 and 2 both divide 24 and 4.
  REQUIRE(run_cli("sweep --data " + w.path("data.jsonl") +
                  " --sizes 1,2 --output-size 4 --iterations 5 --seed 3 "
                  "--no-timing --out " +
                  w.path("sweep.csv")) == 0);
  const std::string sweep = slurp(w.path("sweep.csv"));
  CHECK(sweep.rfind("n,decode_ms,impressions\n", 0) == 0);
  CHECK(sweep.find("\n1,") != std::string::npos);
  CHECK(sweep.find("\n2,") != std::string::npos);

  SUBCASE("a size that does not divide the output is a usage error") {
    CHECK(run_cli("sweep --data " + w.path("data.jsonl") +
                  " --sizes 3 --output-size 4 --iterations 5 --out " +
                  w.path("s2.csv")) == 1);
  }
}

TEST_CASE("determinism: identical flags give byte-identical outputs") {
  Workdir w;
  REQUIRE(run_cli("gen-data --seed 9 --num-keywords 40 --num-topics 3 "
                  "--embedding-dim 6 --num-adgroups 2 --out " +
                  w.path("data.jsonl")) == 0);
  REQUIRE(run_cli("cluster --input " + w.path("data.jsonl") +
                  " --k 8 --seed 9 --out " + w.path("clusters.jsonl")) == 0);
  const std::string train_args =
      "train --data " + w.path("data.jsonl") + " --clusters " +
      w.path("clusters.jsonl") +
      " --iterations 10 --batch 4 --cluster-size 2 --output-size 4 --seed 9 "
      "--no-timing --checkpoint-out ";
  REQUIRE(run_cli(train_args + w.path("m1.jsonl") + " --metrics-out " +
                  w.path("t1.csv")) == 0);
  REQUIRE(run_cli(train_args + w.path("m2.jsonl") + " --metrics-out " +
                  w.path("t2.csv")) == 0);
  CHECK(slurp(w.path("t1.csv")) == slurp(w.path("t2.csv")));
  CHECK(slurp(w.path("m1.jsonl")) == slurp(w.path("m2.jsonl")));

  const std::string bench_args =
      "benchmark --data " + w.path("data.jsonl") + " --clusters " +
      w.path("clusters.jsonl") + " --checkpoint " + w.path("m1.jsonl") +
      " --methods random,pb,ip,drl --seed 9 --no-timing --out ";
  REQUIRE(run_cli(bench_args + w.path("b1.csv")) == 0);
  REQUIRE(run_cli(bench_args + w.path("b2.csv")) == 0);
  CHECK(slurp(w.path("b1.csv")) == slurp(w.path("b2.csv")));
}

TEST_CASE("exit codes: usage 1, data 2, failed check 3") {
  Workdir w;
  SUBCASE("missing required flags") {
    CHECK(run_cli("gen-data --num-keywords 10") == 1);
    CHECK(run_cli("definitely-not-a-command") == 1);
  }
  SUBCASE("drl without a checkpoint is a usage error") {
    REQUIRE(run_cli("gen-data --seed 1 --num-keywords 40 --num-topics 3 "
                    "--embedding-dim 6 --num-adgroups 2 --out " +
                    w.path("data.jsonl")) == 0);
    CHECK(run_cli("benchmark --data " + w.path("data.jsonl") +
                  " --methods drl --out " + w.path("b.csv")) == 1);
  }
  SUBCASE("unreadable dataset is a data error") {
    CHECK(run_cli("cluster --input " + w.path("missing.jsonl") +
                  " --k 4 --out " + w.path("c.jsonl")) == 2);
  }
  SUBCASE("a truncated dataset is a data error") {
    REQUIRE(run_cli("gen-data --seed 1 --num-keywords 40 --num-topics 3 "
                    "--embedding-dim 6 --num-adgroups 2 --out " +
                    w.path("data.jsonl")) == 0);
    const std::string full = slurp(w.path("data.jsonl"));
    kwrec::write_text_file(w.path("cut.jsonl"),
                           full.substr(0, full.size() / 2));
    CHECK(run_cli("cluster --input " + w.path("cut.jsonl") + " --k 4 --out " +
                  w.path("c.jsonl")) == 2);
  }
  SUBCASE("gradcheck passes clean and fails when corrupted") {
    CHECK(run_cli("gradcheck --seed 0") == 0);
    CHECK(run_cli("gradcheck --seed 0 --corrupt-gradient") == 3);
    CHECK(run_cli("gradcheck --seed 0") == 0);  // repeatable
  }
}

TEST_SUITE_END();
