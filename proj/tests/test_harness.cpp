#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include "json.hpp"

#include "tapscope/errors.hpp"
#include "tapscope/harness.hpp"

using namespace tapscope;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("tapscope_test_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig small_config()
{
    ExperimentConfig c;
    c.model.n = 100;
    c.seeds = {1, 2};
    c.probe_points = 5;
    c.restarts = 3;
    c.compare_points = 2;
    c.record_timing = false;
    return c;
}

}  // namespace

TEST(Config, RoundTrip)
{
    ExperimentConfig c = small_config();
    c.model.variant = Variant::FMM;
    c.model.lambda = 2.0;
    c.formats = {"json", "csv", "svg"};
    c.sweep.lambdas = {1.2, 1.5};
    c.maxmin.grid = 51;
    const ExperimentConfig back = parse_config(serialize_config(c));
    EXPECT_EQ(back, c);
}

TEST(Config, ParseErrors)
{
    EXPECT_THROW(parse_config("not json"), DomainError);
    EXPECT_THROW(parse_config(R"({"version": 1, "bogus": 3})"), DomainError);
    EXPECT_THROW(parse_config(R"({"model": {"n": 100}})"), DomainError);
    EXPECT_THROW(parse_config(R"({"version": 1, "model": {"n": "big"}})"), DomainError);
    const ExperimentConfig r = parse_config(R"({"version": 1, "seed_range": {"first": 3, "count": 4}})");
    EXPECT_EQ(r.seeds, (std::vector<std::uint64_t>{3, 4, 5, 6}));
    EXPECT_THROW(load_config("/nonexistent/dir/cfg.json"), IoError);
}

TEST(Config, Validation)
{
    ExperimentConfig c = small_config();
    c.model.variant = Variant::FMM;
    c.model.lambda = 0.9;
    EXPECT_THROW(c.validate(), RegimeError);
    c = small_config();
    c.model.gamma0 = 0.0;
    EXPECT_THROW(c.validate(), RegimeError);
    c = small_config();
    c.epsilon = -1;
    EXPECT_THROW(c.validate(), DomainError);
    c = small_config();
    c.seeds.clear();
    EXPECT_THROW(c.validate(), DomainError);
}

TEST(Config, SeedLists)
{
    EXPECT_EQ(parse_seed_list("7"), (std::vector<std::uint64_t>{7}));
    EXPECT_EQ(parse_seed_list("1,3,9"), (std::vector<std::uint64_t>{1, 3, 9}));
    EXPECT_EQ(parse_seed_list("1-5,9"), (std::vector<std::uint64_t>{1, 2, 3, 4, 5, 9}));
    EXPECT_THROW(parse_seed_list("5-1"), DomainError);
    EXPECT_THROW(parse_seed_list("x"), DomainError);
    EXPECT_THROW(parse_seed_list(""), DomainError);
}

TEST(Commands, DeterministicWithoutTiming)
{
    const ExperimentConfig c = small_config();
    const CommandResult a = run_command("amp", c), b = run_command("amp", c);
    EXPECT_EQ(a.json, b.json);
    EXPECT_EQ(run_command("sf-verify", c).json, run_command("sf-verify", c).json);
}

TEST(Commands, RegimeExitCode)
{
    ExperimentConfig c = small_config();
    c.model.variant = Variant::FMM;
    c.model.lambda = 0.9;
    const CommandResult r = run_command("se", c);
    EXPECT_EQ(r.exit_code, kExitRegime);
    const auto j = nlohmann::json::parse(r.json);
    EXPECT_EQ(j["error"]["kind"], "regime");
}

TEST(Commands, ReportsCarryConventions)
{
    const CommandResult r = run_command("se", small_config());
    EXPECT_EQ(r.exit_code, kExitPass);
    const auto j = nlohmann::json::parse(r.json);
    EXPECT_TRUE(j.contains("goe_convention"));
    EXPECT_TRUE(j.contains("quadrature_order"));
    EXPECT_TRUE(j.contains("config"));
    EXPECT_FALSE(j.contains("timestamp"));
}

TEST(Outputs, CreatesDirectoryAndWritesFormats)
{
    ExperimentConfig c = small_config();
    c.output_dir = scratch("out").string() + "/nested";
    c.formats = {"json", "csv", "svg"};
    const CommandResult r = run_command("se", c);
    const auto files = write_outputs(r, c);
    EXPECT_GE(files.size(), 3u);
    for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;
    bool svg = false;
    for (const auto& f : files)
        if (fs::path(f).extension() == ".svg") {
            std::ifstream in(f);
            std::string s((std::istreambuf_iterator<char>(in)), {});
            EXPECT_NE(s.find("<svg"), std::string::npos);
            svg = true;
        }
    EXPECT_TRUE(svg);
}

TEST(Outputs, UnwritableDirectory)
{
    const fs::path base = scratch("blocker");
    fs::create_directories(base);
    const fs::path file = base / "plain";
    std::ofstream(file) << "x";
    ExperimentConfig c = small_config();
    c.output_dir = (file / "sub").string();
    const CommandResult r = run_command("se", c);
    EXPECT_THROW(write_outputs(r, c), IoError);

#ifdef TAPSCOPE_CLI
    const std::string cmd = std::string(TAPSCOPE_CLI) + " se -q --out " + c.output_dir + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    ASSERT_TRUE(WIFEXITED(st));
    EXPECT_EQ(WEXITSTATUS(st), kExitIo);
    const std::string bad = std::string(TAPSCOPE_CLI) + " se -q --variant fmm --lambda 0.9 --out " +
                            (base / "o").string() + " > /dev/null 2>&1";
    const int st2 = std::system(bad.c_str());
    ASSERT_TRUE(WIFEXITED(st2));
    EXPECT_EQ(WEXITSTATUS(st2), kExitRegime);
#endif
}

TEST(Pipeline, SmokeFullRun)
{
    ExperimentConfig c = small_config();
    c.seeds = {1, 2, 3};
    const auto t0 = std::chrono::steady_clock::now();
    const CommandResult r = run_command("full", c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs, 10.0);
    const auto j = nlohmann::json::parse(r.json);
    ASSERT_TRUE(j.contains("criteria"));
    EXPECT_EQ(j["criteria"].size(), 9u);
    EXPECT_TRUE(r.exit_code == kExitPass || r.exit_code == kExitCriterion);
}

TEST(Pipeline, RunSeedsSortedAndStable)
{
    ExperimentConfig c = small_config();
    c.seeds = {3, 1, 2};
    c.workers = 2;
    Stages st;
    st.stationary = st.probe = st.compare = false;
    const auto recs = run_seeds(c, st);
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[0].seed, 1u);
    EXPECT_EQ(recs[2].seed, 3u);
    c.workers = 1;
    const auto again = run_seeds(c, st);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(recs[i].max_q_gap, again[i].max_q_gap);
        EXPECT_EQ(recs[i].bdef_residual, again[i].bdef_residual);
        EXPECT_TRUE(recs[i].errors.empty());
    }
}

TEST(Numerics, FiniteDifferencesAgree)
{
    ModelParams p;
    p.n = 150;
    const NumericsReport r = numerics_check(p, 1, 5);
    EXPECT_EQ(r.n, 150);
    EXPECT_LE(r.grad_fd_rel, 1e-6);
    EXPECT_LE(r.hess_fd_rel, 1e-4);
    EXPECT_LE(r.split_rel, 1e-10);
    EXPECT_LE(r.matrix_split_rel, 1e-10);
}
