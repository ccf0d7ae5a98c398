#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <string>

#include "cli_util.hpp"
#include "echo/report_json.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("echo_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    const auto r = cli::run("gen-lfr --n 150 --mean-degree 8 --max-degree 20 --min-community 10 --max-community 40 "
                            "--mu 0.2 --seed 3 --out-prefix " + (dir_ / "g").string());
    ASSERT_EQ(r.code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string p(const std::string& name) { return (dir_ / name).string(); }
  static std::string inputs() { return " --graph " + p("g.edges") + " --features " + p("g.features.csv"); }
  static std::string fast() { return " --epochs 3 --embed-dim 16 --neg-per-node 16 --seed 5"; }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, GenLfrWritesThreeFiles) {
  EXPECT_TRUE(fs::exists(p("g.edges")));
  EXPECT_TRUE(fs::exists(p("g.truth")));
  EXPECT_TRUE(fs::exists(p("g.features.csv")));
  auto r = cli::run("gen-lfr --n 150 --mean-degree 8 --max-degree 20 --min-community 10 --max-community 40 --mu 0.2 "
                    "--seed 3 --out-prefix " + p("again"));
  EXPECT_EQ(cli::slurp(p("again.edges")), cli::slurp(p("g.edges")));
  EXPECT_EQ(cli::field(r.out, "nodes"), "150");
}

TEST_F(Cli, VersionAndInfo) {
  for (const char* sub : {"version", "info"}) {
    auto r = cli::run(sub);
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("echo 0.1.0"), std::string::npos);
  }
}

TEST_F(Cli, MissingFeaturesIsUsageErrorNamingPath) {
  auto r = cli::run("detect --graph " + p("g.edges") + " --features " + p("nope.csv") + " --out " + p("x.txt"), true);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find(p("nope.csv")), std::string::npos) << r.out;
}

TEST_F(Cli, BadUsageExitsTwo) {
  EXPECT_EQ(cli::run("detect --no-such-flag").code, 2);
  EXPECT_EQ(cli::run("").code, 2);
  EXPECT_EQ(cli::run("detect --set bogus=1 --dry-run").code, 2);
  EXPECT_EQ(cli::run("detect --epochs zero --dry-run").code, 2);
  EXPECT_EQ(cli::run("detect" + inputs()).code, 2);  // no --out
}

TEST_F(Cli, DryRunEchoesPresetWithOverrides) {
  auto r = cli::run("detect --config " + std::string(ECHO_PRESET_DIR) + "/lfr.conf --dry-run --temperature 0.3");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("pathway = densifying"), std::string::npos);
  EXPECT_NE(r.out.find("steps = 2"), std::string::npos);
  EXPECT_NE(r.out.find("temperature = 0.3"), std::string::npos);
  EXPECT_NE(r.out.find("sparsity = 1e-04"), std::string::npos);
  EXPECT_NE(r.out.find("delta = 0.15"), std::string::npos);
  // The echo is itself a valid config file.
  std::ofstream(p("echo.conf")) << r.out;
  auto again = cli::run("detect --config " + p("echo.conf") + " --dry-run");
  EXPECT_EQ(again.out, r.out);
}

TEST_F(Cli, DetectEqualsStageComposition) {
  const std::string common = inputs() + fast() + " --pathway densifying --steps 1";
  auto d = cli::run("detect" + common + " --out " + p("detect.txt") + " --dump-embeddings " + p("d.eche") +
                    " --dump-similarity " + p("d.wedges"));
  ASSERT_EQ(d.code, 0);
  ASSERT_EQ(cli::run("train" + common + " --out " + p("t.eche")).code, 0);
  ASSERT_EQ(cli::run("extract --seed 5 --graph " + p("g.edges") + " --embeddings " + p("t.eche") + " --out " +
                     p("t.wedges")).code,
            0);
  ASSERT_EQ(cli::run("cluster --seed 5 --sim " + p("t.wedges") + " --out " + p("t.txt")).code, 0);
  EXPECT_EQ(cli::slurp(p("t.eche")), cli::slurp(p("d.eche")));
  EXPECT_EQ(cli::slurp(p("t.wedges")), cli::slurp(p("d.wedges")));
  EXPECT_EQ(cli::slurp(p("t.txt")), cli::slurp(p("detect.txt")));
}

TEST_F(Cli, DetectTimingsAndJson) {
  auto r = cli::run("detect" + inputs() + fast() + " --out " + p("j.txt") + " --truth " + p("g.truth") +
                    " --timings --json " + p("r.json"));
  ASSERT_EQ(r.code, 0);
  for (const char* k : {"phase1_s", "phase2_s", "phase3_s", "total_s", "nodes_per_s"}) {
    EXPECT_FALSE(cli::field(r.out, k).empty()) << k;
  }
  EXPECT_GT(std::stod(cli::field(r.out, "total_s")), 0.0);
  const auto j = nlohmann::json::parse(cli::slurp(p("r.json")));
  for (const char* k : {"route", "n_nodes", "n_communities_pred", "n_communities_true", "nmi", "timings",
                        "modularity_pred", "louvain_pass_modularity", "nodes_per_s", "config"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(j["n_nodes"], 150);
  EXPECT_TRUE(j["timings"].contains("phase2_s"));
  EXPECT_EQ(j["config"]["epochs"], "3");
  const auto t = j["timings"].get<echo::PhaseTimings>();
  EXPECT_NEAR(t.total_s, t.phase1_s + t.phase2_s + t.phase3_s, 0.05 * t.total_s + 1e-3);
}

TEST_F(Cli, EvalAndLpa) {
  ASSERT_EQ(cli::run("lpa --graph " + p("g.edges") + " --seed 2 --out " + p("lpa.txt")).code, 0);
  auto r = cli::run("eval --truth " + p("g.truth") + " --pred " + p("g.truth") + " --json " + p("e.json"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::stod(cli::field(r.out, "nmi")), 1.0);
  const auto rep = nlohmann::json::parse(cli::slurp(p("e.json"))).get<echo::EvalReport>();
  EXPECT_EQ(rep.n_nodes, 150u);
  auto l = cli::run("eval --truth " + p("g.truth") + " --pred " + p("lpa.txt") + " --graph " + p("g.edges"));
  ASSERT_EQ(l.code, 0);
  EXPECT_FALSE(cli::field(l.out, "modularity_pred").empty());
}

TEST_F(Cli, RouteReportsDecision) {
  auto r = cli::run("route" + inputs());
  ASSERT_EQ(r.code, 0);
  EXPECT_FALSE(cli::field(r.out, "assortativity_ratio").empty());
  EXPECT_EQ(cli::field(r.out, "exact_baseline"), "true");
  auto f = cli::run("route" + inputs() + " --pathway isolating");
  EXPECT_EQ(cli::field(f.out, "pathway"), "isolating (forced)");
}

TEST_F(Cli, OneSidedAddsEdges) {
  const std::string common = inputs() + fast();
  auto a = cli::run("detect" + common + " --out " + p("m.txt"));
  auto b = cli::run("detect" + common + " --one-sided --out " + p("o.txt"));
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_GT(std::stoul(cli::field(b.out, "similarity_edges")), std::stoul(cli::field(a.out, "similarity_edges")));
}

TEST_F(Cli, DumpAttentionWritesOneLinePerDirectedEdge) {
  ASSERT_EQ(cli::run("train" + inputs() + fast() + " --out " + p("a.eche") + " --dump-attention " + p("a.att")).code,
            0);
  EXPECT_TRUE(fs::exists(p("a.att")));
  EXPECT_GT(fs::file_size(p("a.att")), 0u);
}
