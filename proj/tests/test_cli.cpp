#include <doctest.h>

#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "blv/cli.hpp"

namespace fs = std::filesystem;
using blv::cli::run;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("blv_cli_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// small end-to-end pipeline in one directory; returns the paths written
std::vector<std::string> run_pipeline(const TempDir& tmp, const std::string& seed) {
  const std::string gt = tmp.file("gt.blv");
  const std::string data = tmp.file("data.blv");
  const std::string model = tmp.file("model.blv");
  const std::string assign = tmp.file("assign.csv");
  const std::string match_csv = tmp.file("match.csv");
  const std::string mom = tmp.file("moments.csv");

  REQUIRE(run({"synth", "--n", "12", "--m", "12", "--k", "1", "--k-max", "3", "--c", "4",
               "--c-min", "2", "--c-max", "5", "--mu-p", "0.3", "--sigma-p", "0.1", "--mu-r",
               "0.04", "--sigma-r", "0.02", "--seed", seed, "-o", gt}) == 0);
  REQUIRE(run({"gen", "--gt", gt, "--count", "2500", "--seed", seed, "-o", data}) == 0);
  REQUIRE(run({"train", "--data", data, "--passes", "2", "--seed", seed, "-o", model}) == 0);
  REQUIRE(run({"infer", "--model", model, "--data", data, "--threads", "2", "-o", assign}) == 0);
  REQUIRE(run({"match", model, gt, "-o", match_csv}) == 0);
  REQUIRE(run({"moments", "--data", data, "-o", mom}) == 0);
  return {gt, data, model, assign, match_csv, mom};
}

}  // namespace

TEST_CASE("cli pipeline runs end to end") {
  TempDir tmp;
  const auto files = run_pipeline(tmp, "42");
  for (const auto& f : files) CHECK(fs::exists(f));

  // downstream commands on the pipeline products
  CHECK(run({"coactivity", "--assignments", tmp.file("assign.csv"), "-o", tmp.file("coact.csv")}) == 0);
  CHECK(run({"metrics", "--model", tmp.file("model.blv"), "--assignments", tmp.file("assign.csv"),
             "-o", tmp.file("metrics.csv")}) == 0);
  CHECK(run({"export", "--input", tmp.file("model.blv"), "-o", tmp.file("model.csv")}) == 0);
  CHECK(run({"export", "--input", tmp.file("gt.blv"), "-o", tmp.file("gt.csv")}) == 0);
  CHECK(run({"export", "--input", tmp.file("data.blv"), "-o", tmp.file("data.csv")}) == 0);
  CHECK(fs::exists(tmp.file("coact.csv")));
  CHECK(fs::exists(tmp.file("metrics.csv")));
  CHECK(fs::exists(tmp.file("model.csv")));
}

TEST_CASE("cli pipelines are byte-identical under equal seeds") {
  TempDir a, b;
  const auto files_a = run_pipeline(a, "7");
  const auto files_b = run_pipeline(b, "7");
  REQUIRE(files_a.size() == files_b.size());
  for (std::size_t i = 0; i < files_a.size(); ++i) {
    CHECK(blv::detail::read_file_bytes(files_a[i]) == blv::detail::read_file_bytes(files_b[i]));
  }
}

TEST_CASE("cli seeds change the outputs") {
  TempDir a, b;
  run_pipeline(a, "1");
  run_pipeline(b, "2");
  CHECK(blv::detail::read_file_bytes(a.file("gt.blv")) !=
        blv::detail::read_file_bytes(b.file("gt.blv")));
}

TEST_CASE("cli exit codes: usage, data and numeric errors") {
  TempDir tmp;
  CHECK(run({"definitely-not-a-command"}) == 1);
  CHECK(run({"synth", "--n", "4", "--m", "4", "--no-such-flag", "-o", tmp.file("x.blv")}) == 1);
  CHECK(run({"train", "--data", tmp.file("missing.blv"), "-o", tmp.file("m.blv")}) == 2);
  // k_min > k violates the hyperparameter invariants
  CHECK(run({"synth", "--n", "6", "--m", "6", "--k", "1", "--k-min", "3", "--k-max", "4", "-o",
             tmp.file("bad.blv")}) == 3);
  CHECK(run({"--help"}) == 0);
  CHECK(run({"train", "--help"}) == 0);
}

TEST_CASE("cli rejects dimension mismatches between artifacts") {
  TempDir tmp;
  REQUIRE(run({"synth", "--n", "8", "--m", "8", "--k", "1", "--k-max", "2", "--c", "2", "--c-min",
               "1", "--c-max", "3", "--seed", "3", "-o", tmp.file("gt8.blv")}) == 0);
  REQUIRE(run({"synth", "--n", "6", "--m", "6", "--k", "1", "--k-max", "2", "--c", "2", "--c-min",
               "1", "--c-max", "3", "--seed", "3", "-o", tmp.file("gt6.blv")}) == 0);
  REQUIRE(run({"gen", "--gt", tmp.file("gt8.blv"), "--count", "200", "--seed", "1", "-o",
               tmp.file("d8.blv")}) == 0);
  REQUIRE(run({"gen", "--gt", tmp.file("gt6.blv"), "--count", "200", "--seed", "1", "-o",
               tmp.file("d6.blv")}) == 0);
  REQUIRE(run({"train", "--data", tmp.file("d8.blv"), "--passes", "1", "-o", tmp.file("m8.blv")}) == 0);
  CHECK(run({"infer", "--model", tmp.file("m8.blv"), "--data", tmp.file("d6.blv"), "-o",
             tmp.file("a.csv")}) == 2);
  CHECK(run({"match", tmp.file("m8.blv"), tmp.file("gt6.blv")}) == 2);
}

TEST_CASE("cli bin and moments work from an event file") {
  TempDir tmp;
  blv::detail::write_file_bytes(tmp.file("ev.csv"),
                                "# blv-events v1\n"
                                "# n_cells=4 n_trials=2 trial_duration_ms=50\n"
                                "cell,trial,time_ms\n"
                                "0,0,3.5\n1,0,10\n2,1,22.25\n3,1,49.9\n0,1,7\n");
  REQUIRE(run({"bin", "--events", tmp.file("ev.csv"), "--bin-ms", "5", "--step-ms", "1", "-o",
               tmp.file("corpus.blv")}) == 0);
  CHECK(run({"moments", "--data", tmp.file("corpus.blv"), "-o", tmp.file("mom.csv")}) == 0);
  CHECK(run({"export", "--input", tmp.file("corpus.blv"), "-o", tmp.file("corpus.csv")}) == 0);
  const blv::BinnedCorpus c = blv::load_corpus(tmp.file("corpus.blv"));
  CHECK(c.words.size() == 2 * 46);
}

TEST_CASE("cli fit recovers hyperparameters from a tiny grid") {
  TempDir tmp;
  REQUIRE(run({"synth", "--n", "10", "--m", "10", "--k", "1", "--k-max", "3", "--c", "4",
               "--c-min", "2", "--c-max", "5", "--mu-p", "0.3", "--sigma-p", "0.1", "--seed", "9",
               "-o", tmp.file("gt.blv")}) == 0);
  REQUIRE(run({"gen", "--gt", tmp.file("gt.blv"), "--count", "6000", "--seed", "9", "-o",
               tmp.file("data.blv")}) == 0);
  REQUIRE(run({"moments", "--data", tmp.file("data.blv"), "-o", tmp.file("target.csv")}) == 0);
  REQUIRE(run({"fit", "--target", tmp.file("target.csv"), "--n", "10", "--m", "10", "--grid-k",
               "1,2", "--grid-k-max", "3", "--grid-c", "2,4", "--grid-c-min", "2", "--grid-c-max",
               "5", "--grid-mu-p", "0.3", "--grid-sigma-p", "0.1", "--words-per-eval", "6000",
               "--seed", "5", "-o", tmp.file("fit.csv")}) == 0);
  CHECK(fs::exists(tmp.file("fit.csv")));
  const std::string csv = blv::detail::read_file_bytes(tmp.file("fit.csv"));
  CHECK(csv.find("chosen") != std::string::npos);
}

TEST_CASE("cli metrics with partners, cell types and a null-rate table") {
  TempDir tmp;
  REQUIRE(run({"synth", "--n", "10", "--m", "10", "--k", "1", "--k-max", "3", "--c", "3",
               "--c-min", "2", "--c-max", "4", "--seed", "11", "-o", tmp.file("gt.blv")}) == 0);
  REQUIRE(run({"gen", "--gt", tmp.file("gt.blv"), "--count", "1500", "--seed", "11", "-o",
               tmp.file("data.blv")}) == 0);
  REQUIRE(run({"train", "--data", tmp.file("data.blv"), "--passes", "1", "--seed", "1", "-o",
               tmp.file("m1.blv")}) == 0);
  REQUIRE(run({"train", "--data", tmp.file("data.blv"), "--passes", "1", "--seed", "2", "-o",
               tmp.file("m2.blv")}) == 0);
  REQUIRE(run({"infer", "--model", tmp.file("m1.blv"), "--data", tmp.file("data.blv"), "-o",
               tmp.file("a1.csv")}) == 0);
  REQUIRE(run({"infer", "--model", tmp.file("m2.blv"), "--data", tmp.file("data.blv"), "-o",
               tmp.file("a2.csv")}) == 0);

  // uniform null rates over the synthetic index-time axis
  {
    blv::NullRateTable t;
    t.n_cells = 10;
    t.bin_ms = 1.0;
    t.rates.assign(1500, std::vector<double>(10, 0.05));
    blv::save_null_rates(tmp.file("null.csv"), t);
  }
  {
    std::string types = "cell,type\n";
    for (int i = 0; i < 10; ++i) types += std::to_string(i) + (i < 5 ? ",offBT\n" : ",onBT\n");
    blv::detail::write_file_bytes(tmp.file("types.csv"), types);
  }

  REQUIRE(run({"metrics", "--model", tmp.file("m1.blv"), "--assignments", tmp.file("a1.csv"),
               "--data", tmp.file("data.blv"), "--null-rates", tmp.file("null.csv"), "--partner",
               tmp.file("m2.blv") + ":" + tmp.file("a2.csv"), "--cell-types", tmp.file("types.csv"),
               "--type-pair", "offBT,onBT", "--delta-bins", "1,10", "-o",
               tmp.file("metrics.csv")}) == 0);
  const std::string csv = blv::detail::read_file_bytes(tmp.file("metrics.csv"));
  CHECK(csv.find("dpy_1ms") != std::string::npos);
  CHECK(csv.find("dpy_10ms") != std::string::npos);
  CHECK(csv.find("r_x") != std::string::npos);
}

TEST_CASE("cli match writes a loadable binary report for a pair") {
  TempDir tmp;
  REQUIRE(run({"synth", "--n", "8", "--m", "8", "--k", "1", "--k-max", "2", "--c", "3", "--c-min",
               "2", "--c-max", "4", "--seed", "21", "-o", tmp.file("gt.blv")}) == 0);
  REQUIRE(run({"gen", "--gt", tmp.file("gt.blv"), "--count", "800", "--seed", "21", "-o",
               tmp.file("d.blv")}) == 0);
  REQUIRE(run({"train", "--data", tmp.file("d.blv"), "--passes", "1", "-o", tmp.file("m.blv")}) == 0);
  REQUIRE(run({"match", tmp.file("m.blv"), tmp.file("gt.blv"), "-o", tmp.file("match.csv"),
               "--report", tmp.file("match.blv")}) == 0);
  const blv::MatchFile mf = blv::load_match_report(tmp.file("match.blv"));
  CHECK(mf.report.assignment.size() == 8);
  CHECK(run({"export", "--input", tmp.file("match.blv"), "-o", tmp.file("match_export.csv")}) == 0);
}
