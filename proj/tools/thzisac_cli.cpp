// SPDX-License-Identifier: Apache-2.0
//
// thzisac: THz integrated sensing and communication simulation library
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <thzisac/harness/experiments.hpp>
#include <thzisac/harness/selftest.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>

namespace
{
    constexpr int kExitConfig = 2;
    constexpr int kExitSelftest = 3;

    struct RunOptions
    {
        std::string config;
        std::optional<std::uint64_t> seed;
        std::optional<int> trials;
        std::string out = "out";
        int threads = 1;
    };

    int run(const std::string &experiment, const RunOptions &o)
    {
        using namespace thz::harness;
        const json user = o.config.empty() ? json::object() : read_json_file(o.config);
        ExperimentConfig cfg = load_config(experiment, user, o.seed, o.trials);
        cfg.threads = o.threads > 0 ? o.threads : int(std::max(1u, std::thread::hardware_concurrency()));
        std::cerr << experiment << ": config_hash=" << cfg.hash() << " seed=" << cfg.seed << " trials=" << cfg.trials
                  << " threads=" << cfg.threads << "\n";
        const auto output = run_experiment(cfg);
        for (const auto &path : write_output(output, cfg, o.out))
            std::cout << path.string() << "\n";
        return 0;
    }

    int selftest()
    {
        bool ok = true;
        for (const auto &c : thz::harness::run_selftest())
        {
            std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
            ok = ok && c.passed;
        }
        return ok ? 0 : kExitSelftest;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"THz ISAC precoding and sensing experiments"};
    app.require_subcommand(1);
    RunOptions opts;
    for (const auto &name : thz::harness::experiment_names())
    {
        auto *sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", opts.config, "JSON config overriding the defaults")->check(CLI::ExistingFile);
        sub->add_option("--seed", opts.seed, "root seed (U64)");
        sub->add_option("--out", opts.out, "output directory")->capture_default_str();
        sub->add_option("--trials", opts.trials, "number of trials")->check(CLI::PositiveNumber);
        sub->add_option("--threads", opts.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber)->capture_default_str();
    }
    app.add_subcommand("selftest", "run the invariant suite");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try
    {
        const auto *sub = app.get_subcommands().front();
        if (sub->get_name() == "selftest")
            return selftest();
        return run(sub->get_name(), opts);
    }
    catch (const thz::harness::ConfigError &e)
    {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
