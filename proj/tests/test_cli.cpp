#include <catch_amalgamated.hpp>

#include <blockdict/analysis.hpp>
#include <blockdict/cli.hpp>
#include <blockdict/io.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace blockdict;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("blockdict_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static inline int counter = 0;
};

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

void write_config(const std::string& path, const std::string& body) {
  std::ofstream(path) << body;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small generation config shared by several cases.
const char* kGenConfig = R"({
  "m": 12, "n_atoms": 18, "oracle_block_size": 3, "target_intra_corr": 0.8,
  "n_signals": 120, "blocks_per_signal": 2
})";

}  // namespace

TEST_CASE("help text names every subcommand and csv layout") {
  const RunResult r = run({"--help"});
  REQUIRE(r.code == 0);
  for (const char* word : {"gen", "train", "code", "analyze", "exp", "classify",
                           "fig5", "fig6a", "fig6d", "rel_error", "coherence.csv"})
    REQUIRE(r.out.find(word) != std::string::npos);
}

TEST_CASE("unknown config keys are rejected with exit code 2") {
  TempDir tmp;
  write_config(tmp.file("c.json"), R"({"m": 12, "bogus_key": 1})");
  const RunResult r = run({"gen", "--config", tmp.file("c.json"), "--out",
                           tmp.file("out")});
  REQUIRE(r.code == 2);
  REQUIRE(r.err.find("unknown config key 'bogus_key'") != std::string::npos);
}

TEST_CASE("missing required keys are reported by name") {
  TempDir tmp;
  write_config(tmp.file("c.json"), R"({"n_atoms": 18})");
  const RunResult r = run({"gen", "--config", tmp.file("c.json"), "--out",
                           tmp.file("out")});
  REQUIRE(r.code == 2);
  REQUIRE(r.err.find("missing required key 'm'") != std::string::npos);
}

TEST_CASE("absent config and data files exit with the path in the message") {
  TempDir tmp;
  const RunResult r = run({"gen", "--config", tmp.file("nope.json")});
  REQUIRE(r.code == 2);
  REQUIRE(r.err.find("nope.json") != std::string::npos);

  write_config(tmp.file("t.json"), R"({"data": "/no/such/data.bdkt"})");
  const RunResult r2 = run({"train", "--config", tmp.file("t.json"), "--out",
                            tmp.file("out")});
  REQUIRE(r2.code == 3);
  REQUIRE(r2.err.find("/no/such/data.bdkt") != std::string::npos);
}

TEST_CASE("malformed command lines exit with code 2") {
  REQUIRE(run({"frobnicate"}).code == 2);
  REQUIRE(run({}).code == 2);
  REQUIRE(run({"exp", "fig9"}).code == 2);
}

TEST_CASE("gen writes a loadable oracle and corpus deterministically") {
  TempDir tmp;
  write_config(tmp.file("g.json"), kGenConfig);
  const RunResult r = run({"gen", "--config", tmp.file("g.json"), "--seed", "5",
                           "--out", tmp.file("a")});
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("oracle.bdkt") != std::string::npos);
  REQUIRE(r.out.find("intra-block") != std::string::npos);

  auto [d, b, labels] = load_dictionary(tmp.file("a/oracle.bdkt"));
  REQUIRE(d.dim() == 12);
  REQUIRE(d.atom_count() == 18);
  REQUIRE(b.block_count() == 6);
  REQUIRE_FALSE(labels.has_value());
  const TrainingSet ys = load_training_set(tmp.file("a/data.bdkt"));
  REQUIRE(ys.size() == 120);

  // Re-run into a second directory: bytes must match.
  const RunResult r2 = run({"gen", "--config", tmp.file("g.json"), "--seed", "5",
                            "--out", tmp.file("b")});
  REQUIRE(r2.code == 0);
  REQUIRE(slurp(tmp.file("a/oracle.bdkt")) == slurp(tmp.file("b/oracle.bdkt")));
  REQUIRE(slurp(tmp.file("a/data.bdkt")) == slurp(tmp.file("b/data.bdkt")));

  // A different seed must change the corpus.
  const RunResult r3 = run({"gen", "--config", tmp.file("g.json"), "--seed", "6",
                            "--out", tmp.file("c")});
  REQUIRE(r3.code == 0);
  REQUIRE(slurp(tmp.file("a/data.bdkt")) != slurp(tmp.file("c/data.bdkt")));
}

TEST_CASE("train persists the initializer when iterations are zero") {
  TempDir tmp;
  write_config(tmp.file("g.json"), kGenConfig);
  REQUIRE(run({"gen", "--config", tmp.file("g.json"), "--seed", "1", "--out",
               tmp.file("d")}).code == 0);

  write_config(tmp.file("t.json"),
               "{\"data\": \"" + tmp.file("d/data.bdkt") +
                   "\", \"outer_iterations\": 0, \"init_iterations\": 2,"
                   " \"n_atoms\": 18, \"max_block_size\": 3}");
  const RunResult r = run({"train", "--config", tmp.file("t.json"), "--mode",
                           "cgc", "--seed", "3", "--out", tmp.file("t0")});
  REQUIRE(r.code == 0);

  auto [d1, b1, l1] = load_dictionary(tmp.file("t0/trained.bdkt"));
  REQUIRE(d1.atom_count() == 18);
  REQUIRE(b1.fully_formed());
  REQUIRE(slurp(tmp.file("t0/report.jsonl")).empty());

  // Same run with iterations: the report gains one line per iteration and
  // repeat invocations stay byte-identical.
  write_config(tmp.file("t2.json"),
               "{\"data\": \"" + tmp.file("d/data.bdkt") +
                   "\", \"outer_iterations\": 3, \"init_iterations\": 2,"
                   " \"n_atoms\": 18, \"max_block_size\": 3}");
  for (const char* dir : {"t1", "t2"}) {
    REQUIRE(run({"train", "--config", tmp.file("t2.json"), "--mode", "cgc",
                 "--seed", "3", "--out", tmp.file(dir)}).code == 0);
  }
  REQUIRE(slurp(tmp.file("t1/trained.bdkt")) == slurp(tmp.file("t2/trained.bdkt")));
  const std::string report = slurp(tmp.file("t1/report.jsonl"));
  REQUIRE(report == slurp(tmp.file("t2/report.jsonl")));
  REQUIRE(std::count(report.begin(), report.end(), '\n') == 3);
  REQUIRE(report.find("\"iter\":1") != std::string::npos);
  REQUIRE(report.find("rel_error") != std::string::npos);
}

TEST_CASE("code writes coefficients consistent with the dictionary") {
  TempDir tmp;
  write_config(tmp.file("g.json"), kGenConfig);
  REQUIRE(run({"gen", "--config", tmp.file("g.json"), "--seed", "2", "--out",
               tmp.file("d")}).code == 0);

  write_config(tmp.file("c.json"),
               "{\"dict\": \"" + tmp.file("d/oracle.bdkt") + "\", \"data\": \"" +
                   tmp.file("d/data.bdkt") + "\", \"block_sparsity\": 2}");
  const RunResult r = run({"code", "--config", tmp.file("c.json"), "--out",
                           tmp.file("codes")});
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("reconstruction error") != std::string::npos);

  // Written codes must reproduce the pursuit: same error as coding the
  // corpus directly, and every signal within the block budget.
  const TrainingSet codes = load_training_set(tmp.file("codes/codes.bdkt"));
  REQUIRE(codes.dim() == 18);
  REQUIRE(codes.size() == 120);
  auto [d, b, labels] = load_dictionary(tmp.file("d/oracle.bdkt"));
  const TrainingSet ys = load_training_set(tmp.file("d/data.bdkt"));
  const double rel =
      (ys.signals() - d.atoms() * codes.signals()).norm() / ys.signals().norm();
  REQUIRE(rel == Catch::Approx(reconstruction_error(ys, d, b, 2)).margin(1e-12));
  REQUIRE(rel < 0.5);
  for (Index s = 0; s < codes.size(); ++s)
    REQUIRE(SparseCodes::block_support_size(codes.signals().col(s), b) <= 2);
}

TEST_CASE("analyze emits one or two coherence columns") {
  TempDir tmp;
  write_config(tmp.file("g.json"), kGenConfig);
  REQUIRE(run({"gen", "--config", tmp.file("g.json"), "--seed", "4", "--out",
               tmp.file("d")}).code == 0);

  const RunResult one = run({"analyze", tmp.file("d/oracle.bdkt"), "--out",
                             tmp.file("a1")});
  REQUIRE(one.code == 0);
  const std::string csv1 = slurp(tmp.file("a1/coherence.csv"));
  REQUIRE(csv1.rfind("rank,corr\n", 0) == 0);

  const RunResult two = run({"analyze", tmp.file("d/oracle.bdkt"),
                             tmp.file("d/oracle.bdkt"), "--out", tmp.file("a2")});
  REQUIRE(two.code == 0);
  const std::string csv2 = slurp(tmp.file("a2/coherence.csv"));
  REQUIRE(csv2.rfind("rank,corr_a,corr_b\n", 0) == 0);
  REQUIRE(two.out.find("pairs with |corr|") != std::string::npos);

  const RunResult bad = run({"analyze", tmp.file("d/absent.bdkt"), "--out",
                             tmp.file("a3")});
  REQUIRE(bad.code == 3);
}

TEST_CASE("experiment reruns are byte-identical") {
  TempDir tmp;
  // Shrink the corpus so the study stays quick; the defaults mirror the
  // reference corpus and are exercised by the acceptance binary instead.
  write_config(tmp.file("e.json"), R"({
    "m": 12, "n_atoms": 18, "oracle_block_size": 3, "target_intra_corr": 0.8,
    "n_signals": 150, "blocks_per_signal": 2, "outer_iterations": 3,
    "init_iterations": 2, "max_block_size": 3, "block_sparsity": 3,
    "atom_sparsity": 6
  })");
  for (const char* dir : {"r1", "r2"}) {
    const RunResult r = run({"exp", "fig6a", "--config", tmp.file("e.json"),
                             "--trials", "2", "--seed", "9", "--out",
                             tmp.file(dir)});
    REQUIRE(r.code == 0);
  }
  const std::string csv = slurp(tmp.file("r1/fig6a.csv"));
  REQUIRE(csv == slurp(tmp.file("r2/fig6a.csv")));
  REQUIRE(csv.rfind("experiment,trial,method,iteration,rel_error\n", 0) == 0);
  REQUIRE(csv.find("fig6a,mean,cgc") != std::string::npos);
  REQUIRE(csv.find("fig6a,mean,sac") != std::string::npos);
}

TEST_CASE("classify benchmark writes accuracies for every mode") {
  TempDir tmp;
  write_config(tmp.file("c.json"), R"({
    "m": 16, "n_classes": 3, "blocks_per_class": 1, "class_pstar": 1,
    "train_per_class": 30, "test_per_class": 10, "classify_snr_db": "inf",
    "outer_iterations": 2, "init_iterations": 2, "max_block_size": 3,
    "block_sparsity": 1, "atoms_per_class": 3
  })");
  const RunResult r = run({"classify", "--config", tmp.file("c.json"),
                           "--trials", "1", "--seed", "11", "--out",
                           tmp.file("cls")});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(tmp.file("cls/classify.csv"));
  REQUIRE(csv.rfind("experiment,trial,rule,dictionary_mode,accuracy\n", 0) == 0);
  for (const char* mode : {"supervised_cgc", "cgc", "ksvd"})
    REQUIRE(csv.find(mode) != std::string::npos);
  REQUIRE(r.out.find("mean accuracy") != std::string::npos);
}
