#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iprep/experiments.hpp"

using namespace iprep;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("iprep_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

ExperimentConfig config(const std::string& text) { return parse_config(json::parse(text)); }

int cli(const std::string& args) {
  const std::string cmd = std::string(IPREP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kFlow = R"({"experiment":"rg_eigenvalue_flow","params":{"model":"central_spin","n_sites":4,"points":3}})";
const char* kParent = R"({"experiment":"xy_parent_check","seed":5,"params":{"n_sites":3,"points":3,"patterns":3}})";

}  // namespace

TEST(Config, RejectsMalformedDocuments) {
  EXPECT_THROW(config(R"({"experiment":"nope"})"), ConfigError);
  EXPECT_THROW(config(R"({"params":{}})"), ConfigError);
  EXPECT_THROW(config(R"({"experiment":"rg_eigenvalue_flow","params":{"model":"central_spin"}})"), ConfigError);
  EXPECT_THROW(config(R"({"experiment":"rg_eigenvalue_flow","params":{"model":"central_spin","n_sites":4,"bogus":1}})"),
               ConfigError);
  EXPECT_THROW(config(R"({"experiment":"rg_eigenvalue_flow","params":{"model":"central_spin","n_sites":"4"}})"),
               ConfigError);
  EXPECT_THROW(config(R"({"experiment":"rg_eigenvalue_flow","params":{"model":"square","n_sites":4}})"), ConfigError);
  EXPECT_THROW(config(R"({"experiment":"rg_eigenvalue_flow","extra":1,"params":{"model":"central_spin","n_sites":4}})"),
               ConfigError);
  EXPECT_THROW(config(R"({"experiment":"rg_eigenvalue_flow","seed":-3,"params":{"model":"central_spin","n_sites":4}})"),
               ConfigError);
}

TEST(Config, RandomizedExperimentsNeedSeed) {
  EXPECT_THROW(config(R"({"experiment":"xy_parent_check","params":{"n_sites":3}})"), ConfigError);
  EXPECT_THROW(config(R"({"experiment":"rg_gap_scaling","params":{"model":"random_uniform","sizes":[4]}})"),
               ConfigError);
  EXPECT_NO_THROW(config(R"({"experiment":"rg_gap_scaling","params":{"model":"central_spin","sizes":[4]}})"));
  EXPECT_EQ(config(kParent).seed.value(), 5u);
}

TEST(Config, SeedBits) {
  EXPECT_EQ(parse_seed_bits("1100"), 0b1100u);
  EXPECT_THROW(parse_seed_bits("10a"), ConfigError);
}

TEST(Config, EveryCatalogEntryIsRegistered) {
  for (const auto& e : experiment_catalog()) EXPECT_TRUE(experiment_registry().count(e.name)) << e.name;
  EXPECT_EQ(experiment_catalog().size(), experiment_registry().size());
}

TEST(Run, SameConfigGivesIdenticalArtifacts) {
  for (const char* text : {kFlow, kParent}) {
    const ExperimentConfig cfg = config(text);
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const RunReport ra = run_experiment(cfg, a, 1), rb = run_experiment(cfg, b, 2);
    EXPECT_TRUE(ra.passed());
    ASSERT_EQ(ra.manifest, rb.manifest);
    for (const auto& f : ra.manifest) {
      if (f == "report.json") continue;
      EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
  }
}

TEST(Run, ArtifactsStayInsideOutputDirectory) {
  const fs::path out = scratch("contained");
  const RunReport r = run_experiment(config(kFlow), out, 1);
  std::set<std::string> listed(r.manifest.begin(), r.manifest.end()), found;
  for (const auto& e : fs::recursive_directory_iterator(out)) found.insert(fs::relative(e.path(), out).string());
  EXPECT_EQ(listed, found);
}

TEST(Run, CsvHeadersAndSidecar) {
  const fs::path out = scratch("headers");
  run_experiment(config(kFlow), out, 1);
  EXPECT_EQ(first_line(out / "eigenvalue_flow.csv"), "g,seed,M,k,q");
  const json side = json::parse(slurp(out / "scan.json"));
  EXPECT_EQ(side["final_states"].size(), 16u);
  EXPECT_EQ(side["final_states"][0]["q"].size(), 4u);

  const fs::path out2 = scratch("headers2");
  run_experiment(config(kParent), out2, 1);
  EXPECT_EQ(first_line(out2 / "xy_parent.csv"), "gamma,h,pattern,ground_energy,degeneracy,gap,integer_deviation");
  const json rep = json::parse(slurp(out2 / "report.json"));
  EXPECT_TRUE(rep["passed"].get<bool>());
  EXPECT_EQ(rep["config"]["seed"], 5);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("list"), 0);
  EXPECT_EQ(cli(std::string("validate --config ") + IPREP_SOURCE_DIR + "/configs/xy_parent_check.json"), 0);

  const fs::path bad = scratch("bad_cfg");
  fs::create_directories(bad);
  {
    std::ofstream(bad / "c.json") << R"({"experiment":"rg_eigenvalue_flow","params":{"n_sites":4}})";
    std::ofstream(bad / "broken.json") << "{ not json";
  }
  const fs::path out = scratch("bad_out");
  EXPECT_EQ(cli("run --config " + (bad / "c.json").string() + " --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(cli("validate --config " + (bad / "broken.json").string()), 2);
  EXPECT_EQ(cli(std::string("validate --config ") + IPREP_SOURCE_DIR + "/configs/bad_unknown_experiment.json"), 2);
  EXPECT_EQ(cli("run --config " + (bad / "missing.json").string()), 2);

  const fs::path good = scratch("good_out");
  {
    std::ofstream(bad / "ok.json") << kFlow;
  }
  EXPECT_EQ(cli("run --threads 2 --config " + (bad / "ok.json").string() + " --out " + good.string()), 0);
  EXPECT_TRUE(fs::exists(good / "report.json"));
}
