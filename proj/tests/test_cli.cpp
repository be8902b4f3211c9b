#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome run_cli(const std::string& args, const fs::path& workdir) {
    const auto log = workdir / "stdout.txt";
    const std::string cmd = std::string("\"") + GRIDSITE_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    o.out = ss.str();
    return o;
}

class Cli : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("gridsite_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

}  // namespace

TEST_F(Cli, SolveBaseCase) {
    const auto o = run_cli("solve --out \"" + (dir_ / "out").string() + "\"", dir_);
    EXPECT_EQ(o.code, 0) << o.out;
    EXPECT_NE(o.out.find("active loss   202.677 kW"), std::string::npos) << o.out;
    EXPECT_NE(o.out.find("at bus 18"), std::string::npos) << o.out;
    EXPECT_TRUE(fs::exists(dir_ / "out" / "voltage_profile.csv"));
}

TEST_F(Cli, SolveFromDataDirectory) {
    const auto o = run_cli(std::string("solve --quiet --dataset \"") + GRIDSITE_DATA_DIR + "/ieee33\" --out \"" +
                               (dir_ / "out").string() + "\"",
                           dir_);
    EXPECT_EQ(o.code, 0) << o.out;
    EXPECT_NE(o.out.find("|S_TL|        243.600 kVA"), std::string::npos) << o.out;
}

TEST_F(Cli, MissingDatasetIsUsageError) {
    const auto o = run_cli("solve --dataset nope", dir_);
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.out.find("dataset not found: nope"), std::string::npos) << o.out;
}

TEST_F(Cli, BadFlagsAreUsageErrors) {
    EXPECT_EQ(run_cli("", dir_).code, 2);
    EXPECT_EQ(run_cli("frobnicate", dir_).code, 2);
    EXPECT_EQ(run_cli("optimize", dir_).code, 2);
    EXPECT_EQ(run_cli("optimize --config \"" + (dir_ / "missing.json").string() + "\"", dir_).code, 2);
    EXPECT_EQ(run_cli("suite --threads 0", dir_).code, 2);
}

TEST_F(Cli, CatalogListsDevices) {
    const auto o = run_cli("catalog", dir_);
    EXPECT_EQ(o.code, 0);
    EXPECT_NE(o.out.find("4014700"), std::string::npos) << o.out;
    EXPECT_NE(o.out.find("Li-ion"), std::string::npos);
    EXPECT_NE(o.out.find("Lead-acid"), std::string::npos);
    int turbine_rows = 0;
    std::istringstream lines(o.out);
    std::string line;
    bool in_wt = false;
    while (std::getline(lines, line)) {
        if (line == "Wind turbines") in_wt = true;
        else if (line.empty()) in_wt = false;
        else if (in_wt && line.find("type") == std::string::npos) ++turbine_rows;
    }
    EXPECT_EQ(turbine_rows, 9);
}

TEST_F(Cli, EvaluateEmptyPlan) {
    std::ofstream(dir_ / "plan.json") << R"({"name": "empty", "placements": []})";
    const auto o = run_cli("evaluate --placements \"" + (dir_ / "plan.json").string() + "\" --out \"" +
                               (dir_ / "out").string() + "\"",
                           dir_);
    EXPECT_EQ(o.code, 0) << o.out;
    EXPECT_TRUE(fs::exists(dir_ / "out" / "reports" / "empty" / "report.json"));
    EXPECT_NE(o.out.find("reduction 0.00%"), std::string::npos) << o.out;
}

TEST_F(Cli, EvaluateRejectsMalformedPlan) {
    std::ofstream(dir_ / "plan.json") << R"({"placements": [{"kind": "PV", "bus": 3, "p": 1, "q": 0}]})";
    EXPECT_EQ(run_cli("evaluate --placements \"" + (dir_ / "plan.json").string() + "\"", dir_).code, 2);
    std::ofstream(dir_ / "slack.json") << R"({"placements": [{"kind": "BESS", "bus": 1, "p": 1, "q": 0}]})";
    EXPECT_EQ(run_cli("evaluate --placements \"" + (dir_ / "slack.json").string() + "\"", dir_).code, 2);
}

TEST_F(Cli, OptimizeWritesReport) {
    std::ofstream(dir_ / "case.json") << R"({"name": "tiny", "family": "BESS_ONLY", "n_bess": 1,
        "ga": {"population": 10, "generations": 3}})";
    const auto o = run_cli("optimize --quiet --seed 3 --config \"" + (dir_ / "case.json").string() + "\" --out \"" +
                               (dir_ / "out").string() + "\"",
                           dir_);
    EXPECT_EQ(o.code, 0) << o.out;
    for (const char* f : {"report.json", "voltage_profile.csv", "ga_trace.csv"}) {
        EXPECT_TRUE(fs::exists(dir_ / "out" / "reports" / "tiny" / f)) << f;
    }
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
    const std::string env = "GRIDSITE_OUT=\"" + (dir_ / "envout").string() + "\" ";
    const auto log = dir_ / "log.txt";
    const std::string cmd = env + "\"" + GRIDSITE_CLI + "\" solve --quiet > \"" + log.string() + "\" 2>&1";
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(dir_ / "envout" / "voltage_profile.csv"));
}
