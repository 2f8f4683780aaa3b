#include <thzisac/harness/experiments.hpp>
#include <thzisac/harness/selftest.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sys/wait.h>

using namespace thz;
using namespace thz::harness;

namespace
{
    json small_arrays()
    {
        return {{"tx_w", 8}, {"tx_l", 8}, {"rx_w", 8}, {"rx_l", 8}};
    }

    std::string render_all(const ExperimentOutput &o, const ExperimentConfig &c)
    {
        std::string s;
        for (const auto &[stem, table] : o.tables)
            s += stem + "\n" + table.render(c.hash(), c.seed);
        return s + o.summary.dump();
    }

    int run_cli(const std::string &args)
    {
        const std::string cmd = std::string(THZISAC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::filesystem::path scratch(const std::string &name)
    {
        auto p = std::filesystem::temp_directory_path() / ("thzisac_test_" + name);
        std::filesystem::remove_all(p);
        std::filesystem::create_directories(p);
        return p;
    }
} // namespace

TEST(Config, DefaultsLoadForEveryExperiment)
{
    for (const auto &name : experiment_names())
    {
        const auto c = load_config(name);
        EXPECT_EQ(c.experiment, name);
        EXPECT_GE(c.trials, 1);
        EXPECT_EQ(c.hash().size(), 16u);
        EXPECT_EQ(c.hash(), load_config(name).hash());
    }
    EXPECT_EQ(load_config("tradeoff").frame.m_subcarriers, 64);
    EXPECT_EQ(load_config("isi-demo").frame.m_cp, 256);
}

TEST(Config, OverridesChangeTheHash)
{
    const auto base = load_config("se-sweep");
    const auto seeded = load_config("se-sweep", json::object(), std::uint64_t{7}, std::nullopt);
    EXPECT_EQ(seeded.seed, 7u);
    EXPECT_NE(seeded.hash(), base.hash());
    const auto fewer = load_config("se-sweep", json::object(), std::nullopt, 3);
    EXPECT_EQ(fewer.trials, 3);
    EXPECT_NE(fewer.hash(), base.hash());
}

TEST(Config, RejectsUnknownKeysAndWrongKinds)
{
    EXPECT_THROW(load_config("tradeoff", {{"bogus", 1}}), ConfigError);
    EXPECT_THROW(load_config("tradeoff", {{"frame", {{"subcarriers", "64"}}}}), ConfigError);
    EXPECT_THROW(load_config("tradeoff", {{"trials", 0}}), ConfigError);
    EXPECT_THROW(load_config("tradeoff", {{"frame", {{"cp_ratio", 0.3}}}}), ConfigError);
    EXPECT_THROW(load_config("no-such-experiment"), ConfigError);
    EXPECT_THROW(load_config("tradeoff", json::array(), std::nullopt, std::nullopt), ConfigError);
    try
    {
        load_config("tradeoff", {{"bogus", 1}, {"frame", {{"symbols", "16"}}}});
        FAIL();
    }
    catch (const ConfigError &e)
    {
        EXPECT_EQ(e.problems().size(), 2u);
    }
}

TEST(Config, RejectsTooManyTargetsPerSlot)
{
    json t = {{"range_m", 5.0}, {"velocity_mps", 1.0}, {"azimuth_deg", 70.0}, {"elevation_deg", 90.0}, {"snr_db", 0.0}};
    json user = {{"arrays", small_arrays()}, {"scene", {{"targets", json::array({t, t, t, t})}}}, {"trials", 1}};
    const auto c = load_config("mc-rmse", user);
    EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(Output, CsvLayout)
{
    CsvTable t({"a", "b", "c"});
    t.add(1, 2.5, std::string("x"));
    t.add(-3, std::nan(""), "y");
    EXPECT_THROW(t.add(1, 2), std::logic_error);
    EXPECT_EQ(t.render("00ff", 9), "# config_hash=00ff seed=9\na,b,c\n1,2.5,x\n-3,nan,y\n");
    EXPECT_EQ(fmt(0.1 + 0.2), "0.3");
    EXPECT_EQ(fmt(true), "1");
}

TEST(Output, WritesTablesAndSummary)
{
    const auto dir = scratch("output");
    const auto c = load_config("isi-demo");
    ExperimentOutput o;
    CsvTable t({"x"});
    t.add(1);
    o.tables.emplace_back("isi_demo_profiles", t);
    o.summary["value"] = 3;
    const auto files = write_output(o, c, dir);
    ASSERT_EQ(files.size(), 2u);
    std::ifstream in(dir / "isi_demo_summary.json");
    const json s = json::parse(in);
    EXPECT_EQ(s["experiment"], "isi-demo");
    EXPECT_EQ(s["config_hash"], c.hash());
    EXPECT_EQ(s["value"], 3);
    EXPECT_TRUE(std::filesystem::exists(dir / "isi_demo_profiles.csv"));
}

TEST(Parallel, ResultsInIndexOrder)
{
    for (int threads : {1, 3, 8})
    {
        const auto v = parallel_map<int>(50, threads, [](int i)
                                         { return i * i; });
        ASSERT_EQ(v.size(), 50u);
        for (int i = 0; i < 50; ++i)
            EXPECT_EQ(v[i], i * i);
    }
    EXPECT_TRUE(parallel_map<int>(0, 4, [](int i)
                                  { return i; })
                    .empty());
}

TEST(Parallel, RethrowsLowestFailingIndex)
{
    try
    {
        parallel_map<int>(20, 4, [](int i) -> int
                          {
            if (i == 7 || i == 13)
                throw std::runtime_error(std::to_string(i));
            return i; });
        FAIL();
    }
    catch (const std::runtime_error &e)
    {
        EXPECT_STREQ(e.what(), "7");
    }
}

TEST(Seeds, TrialStreamsAreIndependentAndStable)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t t = 0; t < 1000; ++t)
        seen.insert(derive_seed(42, 1, t));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(derive_seed(42, 1, 5), derive_seed(42, 1, 5));
    EXPECT_NE(derive_seed(42, 1, 5), derive_seed(42, 2, 5));
    EXPECT_NE(derive_seed(42, 1, 5), derive_seed(43, 1, 5));
}

TEST(Experiments, SeSweepIsDeterministicAcrossThreadCounts)
{
    json user = {{"arrays", small_arrays()}, {"frame", {{"subcarriers", 8}}}, {"snr_db_grid", {-30.0, 0.0}}, {"precoding", {{"sensing_slot", 2}}}, {"trials", 3}};
    auto c = load_config("se-sweep", user);
    c.threads = 1;
    const auto a = render_all(run_experiment(c), c);
    c.threads = 3;
    const auto b = render_all(run_experiment(c), c);
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("vec,16,1,0,"), std::string::npos);
}

TEST(Experiments, McRmseSmallRun)
{
    json user = {{"arrays", small_arrays()}, {"frame", {{"subcarriers", 16}, {"symbols", 8}}}, {"snr_db_grid", {10.0}}, {"trials", 4}};
    auto c = load_config("mc-rmse", user);
    c.threads = 2;
    const auto out = run_experiment(c);
    ASSERT_EQ(out.tables.size(), 2u);
    EXPECT_EQ(out.tables[0].first, "mc_rmse");
    EXPECT_EQ(out.tables[0].second.size(), 2u); // one row per eta
    EXPECT_EQ(out.tables[1].second.size(), 8u); // eta x trial x target
    EXPECT_EQ(render_all(out, c), render_all(run_experiment(c), c));
}

TEST(Experiments, BeamScanTilesTheHalfPlane)
{
    json user = {{"arrays", small_arrays()}, {"frame", {{"subcarriers", 8}}}, {"beam", {{"angle_step_deg", 1.0}, {"slots", {1, 4}}}}};
    const auto c = load_config("beam-scan", user);
    const auto out = run_experiment(c);
    EXPECT_TRUE(out.summary["windows_tile_half_plane"].get<bool>());
    EXPECT_EQ(out.tables[0].second.size(), 2u * 181u);
}

TEST(Selftest, AllChecksPass)
{
    for (const auto &r : run_selftest())
        EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Cli, ExitCodes)
{
    const auto dir = scratch("cli");
    EXPECT_EQ(run_cli("selftest"), 0);
    std::ofstream(dir / "bad.json") << R"({"frame": {"subcarriers": "many"}})";
    EXPECT_EQ(run_cli("tradeoff --config " + (dir / "bad.json").string() + " --out " + dir.string()), 2);
    std::ofstream(dir / "broken.json") << "{ not json";
    EXPECT_EQ(run_cli("tradeoff --config " + (dir / "broken.json").string() + " --out " + dir.string()), 2);
    std::ofstream(dir / "small.json") << R"({"arrays": {"tx_w": 8, "tx_l": 8, "rx_w": 8, "rx_l": 8}, "frame": {"subcarriers": 8}, "beam": {"angle_step_deg": 2.0, "slots": [2]}})";
    EXPECT_EQ(run_cli("beam-scan --config " + (dir / "small.json").string() + " --out " + dir.string()), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "beam_scan.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "beam_scan_summary.json"));
}
