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

#ifndef THZISAC_HARNESS_CONFIG_HPP
#define THZISAC_HARNESS_CONFIG_HPP

#include "../channel.hpp"
#include "../common.hpp"
#include "../geometry.hpp"
#include "../waveform.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace thz::harness
{
    using json = nlohmann::json;

    // Raised for malformed or inconsistent experiment configs (CLI exit code 2)
    class ConfigError : public std::runtime_error
    {
    public:
        explicit ConfigError(const std::vector<std::string> &problems)
            : std::runtime_error(join(problems)), problems_(problems) {}
        const std::vector<std::string> &problems() const { return problems_; }

    private:
        static std::string join(const std::vector<std::string> &p)
        {
            std::string s = "invalid config:";
            for (const auto &x : p)
                s += "\n  " + x;
            return s;
        }
        std::vector<std::string> problems_;
    };

    inline const std::vector<std::string> &experiment_names()
    {
        static const std::vector<std::string> names{"tradeoff", "se-sweep", "beam-scan", "mc-rmse", "isi-demo", "ici-demo"};
        return names;
    }

    // Default config of every experiment. The defaults double as the schema: a user config may only
    // contain keys present here, with the same JSON kind.
    inline json default_config(const std::string &experiment)
    {
        const json frame = {{"subcarriers", 64}, {"symbols", 16}, {"slots", 32}, {"cp_ratio", 0.25}, {"delta_f_khz", 1920.0}, {"fc_ghz", 300.0}};
        const json arrays = {{"tx_w", 32}, {"tx_l", 32}, {"rx_w", 32}, {"rx_l", 32}, {"tx_rf_chains", 4}, {"rx_rf_chains", 4}, {"streams", 4}, {"closed_switches", 16}, {"rx_closed_switches", 16}};
        const json comm = {{"nlos_paths", 4}, {"nlos_loss_db", 15.0}, {"aod_min_deg", -60.0}, {"aod_max_deg", 60.0}, {"aoa_min_deg", -60.0}, {"aoa_max_deg", 60.0}};
        const json solver = {{"max_iter", 50}, {"tol", 1e-4}};
        const json target = {{"range_m", 15.0}, {"velocity_mps", 20.0}, {"azimuth_deg", 70.0}, {"elevation_deg", 90.0}, {"snr_db", 0.0}};
        const json estimation = {{"music_step_deg", 0.01}, {"gss_rounds", 3}, {"gss_iterations", 40}, {"gss_tol_bins", 1e-6}};
        const std::uint64_t seed = 20240917;

        if (experiment == "tradeoff")
        {
            json precoding = solver;
            precoding["eta_grid"] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
            precoding["closed_switch_grid"] = {4, 8, 16};
            precoding["algorithms"] = {"vec", "sca"};
            precoding["sensing_slot"] = 9;
            return {{"frame", frame}, {"arrays", arrays}, {"comm", comm}, {"precoding", precoding}, {"snr_db", -20.0}, {"trials", 20}, {"seed", seed}};
        }
        if (experiment == "se-sweep")
        {
            json precoding = solver;
            precoding["eta_grid"] = {0.6, 1.0};
            precoding["closed_switch_grid"] = {4, 8, 16};
            precoding["algorithms"] = {"vec"};
            precoding["sensing_slot"] = 9;
            return {{"frame", frame}, {"arrays", arrays}, {"comm", comm}, {"precoding", precoding},
                    {"snr_db_grid", {-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0}}, {"trials", 20}, {"seed", seed}};
        }
        if (experiment == "beam-scan")
        {
            json precoding = solver;
            precoding["eta"] = 0.5;
            precoding["algorithm"] = "vec";
            const json beam = {{"angle_step_deg", 0.25}, {"slots", json::array()}};
            return {{"frame", frame}, {"arrays", arrays}, {"comm", comm}, {"precoding", precoding}, {"beam", beam}, {"trials", 1}, {"seed", seed}};
        }
        if (experiment == "mc-rmse")
        {
            json f = frame;
            f["delta_f_khz"] = 3840.0;
            json a = arrays;
            a["closed_switches"] = 4;
            a["rx_closed_switches"] = 4;
            json precoding = solver;
            precoding["eta_grid"] = {0.4, 0.6};
            precoding["algorithm"] = "vec";
            const json scene = {{"targets", json::array({target})}, {"noise_power", 1.0}};
            return {{"frame", f}, {"arrays", a}, {"comm", comm}, {"precoding", precoding}, {"scene", scene}, {"estimation", estimation},
                    {"snr_db_grid", {-30.0, -20.0, -10.0, 0.0, 10.0}}, {"trials", 50}, {"seed", seed}};
        }
        if (experiment == "isi-demo" || experiment == "ici-demo")
        {
            const bool isi = experiment == "isi-demo";
            json f = frame;
            f["subcarriers"] = 1024;
            f["delta_f_khz"] = isi ? 3840.0 : 120.0;
            auto tgt = [&](double r, double v, double snr)
            {
                json t = target;
                t["range_m"] = r;
                t["velocity_mps"] = v;
                t["azimuth_deg"] = 0.0;
                t["snr_db"] = snr;
                return t;
            };
            json targets = isi ? json::array({tgt(10, 5, -10), tgt(45, 5, -10)}) : json::array({tgt(10, 50, -10), tgt(20, 50, -15), tgt(30, 50, 20)});
            const json scene = {{"targets", targets}, {"noise_power", 1.0}};
            json est = {{"gss_rounds", 3}, {"gss_iterations", 40}, {"gss_tol_bins", 1e-6}, {"detection_gate_m", 1.0}};
            // control run without the impairment: wider CP for ISI, slow targets for ICI
            const json control = isi ? json{{"delta_f_khz", 480.0}, {"velocity_mps", 5.0}} : json{{"delta_f_khz", 120.0}, {"velocity_mps", 5.0}};
            return {{"frame", f}, {"scene", scene}, {"estimation", est}, {"control", control}, {"trials", isi ? 10 : 5}, {"seed", seed}};
        }
        throw ConfigError({"unknown experiment '" + experiment + "'"});
    }

    namespace detail
    {
        inline bool same_kind(const json &a, const json &b)
        {
            if (a.is_number() && b.is_number())
                return !(a.is_number_integer() || a.is_number_unsigned()) || b.is_number_integer() || b.is_number_unsigned();
            return a.type() == b.type();
        }

        // Overlay `user` on `defaults`, collecting every unknown key or kind mismatch
        inline json overlay(const json &defaults, const json &user, const std::string &path, std::vector<std::string> &problems)
        {
            if (defaults.is_object())
            {
                if (!user.is_object())
                {
                    problems.push_back(path + ": expected an object");
                    return defaults;
                }
                json out = defaults;
                for (auto it = user.begin(); it != user.end(); ++it)
                {
                    const std::string key = path.empty() ? it.key() : path + "." + it.key();
                    if (!defaults.contains(it.key()))
                    {
                        problems.push_back(key + ": unknown key");
                        continue;
                    }
                    out[it.key()] = overlay(defaults[it.key()], it.value(), key, problems);
                }
                return out;
            }
            if (defaults.is_array())
            {
                if (!user.is_array())
                {
                    problems.push_back(path + ": expected an array");
                    return defaults;
                }
                // arrays of objects are validated element-wise against the first default element
                if (!defaults.empty() && defaults.front().is_object())
                {
                    json out = json::array();
                    for (std::size_t i = 0; i < user.size(); ++i)
                        out.push_back(overlay(defaults.front(), user[i], path + "[" + std::to_string(i) + "]", problems));
                    return out;
                }
                for (std::size_t i = 0; i < user.size(); ++i)
                    if (!user[i].is_primitive() || (!defaults.empty() && !same_kind(defaults.front(), user[i])))
                        problems.push_back(path + "[" + std::to_string(i) + "]: wrong element type");
                return user;
            }
            if (!same_kind(defaults, user))
            {
                problems.push_back(path + ": expected " + std::string(defaults.type_name()) + ", got " + std::string(user.type_name()));
                return defaults;
            }
            return user;
        }

        inline std::uint64_t fnv1a(const std::string &s)
        {
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (unsigned char c : s)
            {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
            return h;
        }
    } // namespace detail

    struct ArrayConfig
    {
        geometry::UpaGeometry tx{32, 32}, rx{32, 32};
        int tx_rf_chains = 4, rx_rf_chains = 4, streams = 4;
        int closed_switches = 16, rx_closed_switches = 16;
    };

    struct TargetConfig
    {
        double range_m = 15.0, velocity_mps = 20.0, azimuth_deg = 70.0, elevation_deg = 90.0, snr_db = 0.0;
    };

    struct ExperimentConfig
    {
        std::string experiment;
        json resolved; // defaults with user overrides applied
        waveform::FrameConfig frame;
        ArrayConfig arrays;
        channel::CommChannelSpec comm;
        std::vector<TargetConfig> targets;
        double noise_power = 1.0;

        std::vector<double> eta_grid;
        double eta = 0.5;
        std::vector<int> closed_switch_grid;
        std::vector<std::string> algorithms;
        int max_iter = 50;
        double tol = 1e-4;
        int sensing_slot = 1;

        double snr_db = -20.0;
        std::vector<double> snr_db_grid;
        double angle_step_deg = 0.25;
        std::vector<int> slots;

        double music_step_deg = 0.01;
        int gss_rounds = 3, gss_iterations = 40;
        double gss_tol_bins = 1e-6;
        double detection_gate_m = 1.0;
        double control_delta_f_khz = 0.0, control_velocity_mps = 0.0;

        int trials = 1;
        std::uint64_t seed = 0;
        int threads = 1;

        std::string hash() const
        {
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(resolved.dump())));
            return buf;
        }
    };

    namespace detail
    {
        inline waveform::FrameConfig parse_frame(const json &f, std::vector<std::string> &problems)
        {
            waveform::FrameConfig c;
            c.m_subcarriers = f["subcarriers"].get<int>();
            c.n_symbols = f["symbols"].get<int>();
            c.q_slots = f["slots"].get<int>();
            c.delta_f = f["delta_f_khz"].get<double>() * 1e3;
            c.fc = f["fc_ghz"].get<double>() * 1e9;
            const double cp = f["cp_ratio"].get<double>() * c.m_subcarriers;
            c.m_cp = int(std::lround(cp));
            if (std::abs(cp - c.m_cp) > 1e-9)
                problems.push_back("frame.cp_ratio: cp_ratio * subcarriers must be an integer");
            try
            {
                c.validate();
            }
            catch (const std::exception &e)
            {
                problems.push_back(std::string("frame: ") + e.what());
            }
            return c;
        }
    } // namespace detail

    // Build a typed config from defaults plus an optional user JSON document
    inline ExperimentConfig load_config(const std::string &experiment, const json &user = json::object())
    {
        std::vector<std::string> problems;
        const json defaults = default_config(experiment);
        const json r = detail::overlay(defaults, user.is_null() ? json::object() : user, "", problems);
        if (!problems.empty())
            throw ConfigError(problems);

        ExperimentConfig c;
        c.experiment = experiment;
        c.resolved = r;
        c.frame = detail::parse_frame(r["frame"], problems);
        c.trials = r["trials"].get<int>();
        c.seed = r["seed"].get<std::uint64_t>();
        if (c.trials < 1)
            problems.push_back("trials: must be >= 1");

        if (r.contains("arrays"))
        {
            const auto &a = r["arrays"];
            c.arrays.tx = {a["tx_w"].get<int>(), a["tx_l"].get<int>()};
            c.arrays.rx = {a["rx_w"].get<int>(), a["rx_l"].get<int>()};
            c.arrays.tx_rf_chains = a["tx_rf_chains"].get<int>();
            c.arrays.rx_rf_chains = a["rx_rf_chains"].get<int>();
            c.arrays.streams = a["streams"].get<int>();
            c.arrays.closed_switches = a["closed_switches"].get<int>();
            c.arrays.rx_closed_switches = a["rx_closed_switches"].get<int>();
            const auto &A = c.arrays;
            if (A.tx.w_count < 1 || A.tx.l_count < 1 || A.rx.w_count < 1 || A.rx.l_count < 1)
                problems.push_back("arrays: element counts must be >= 1");
            if (A.tx_rf_chains < 1 || A.rx_rf_chains < 1)
                problems.push_back("arrays: RF chain counts must be >= 1");
            else
            {
                if (A.tx.size() % A.tx_rf_chains != 0)
                    problems.push_back("arrays.tx_rf_chains: must divide the transmit element count");
                if (A.rx.size() % A.rx_rf_chains != 0)
                    problems.push_back("arrays.rx_rf_chains: must divide the receive element count");
                if (A.streams < 1 || A.streams > A.tx_rf_chains)
                    problems.push_back("arrays.streams: must lie in [1, tx_rf_chains]");
                if (A.closed_switches < A.tx_rf_chains || A.closed_switches > A.tx_rf_chains * A.tx_rf_chains)
                    problems.push_back("arrays.closed_switches: must lie in [tx_rf_chains, tx_rf_chains^2]");
                if (A.rx_closed_switches < A.rx_rf_chains || A.rx_closed_switches > A.rx_rf_chains * A.rx_rf_chains)
                    problems.push_back("arrays.rx_closed_switches: must lie in [rx_rf_chains, rx_rf_chains^2]");
            }
        }
        if (r.contains("comm"))
        {
            const auto &m = r["comm"];
            c.comm.nlos_paths = m["nlos_paths"].get<int>();
            c.comm.nlos_loss_db = m["nlos_loss_db"].get<double>();
            c.comm.aod_min_deg = m["aod_min_deg"].get<double>();
            c.comm.aod_max_deg = m["aod_max_deg"].get<double>();
            c.comm.aoa_min_deg = m["aoa_min_deg"].get<double>();
            c.comm.aoa_max_deg = m["aoa_max_deg"].get<double>();
            if (c.comm.nlos_paths < 0)
                problems.push_back("comm.nlos_paths: must be >= 0");
            if (c.comm.aod_min_deg > c.comm.aod_max_deg || c.comm.aoa_min_deg > c.comm.aoa_max_deg)
                problems.push_back("comm: angle ranges must satisfy min <= max");
        }
        if (r.contains("precoding"))
        {
            const auto &p = r["precoding"];
            c.max_iter = p["max_iter"].get<int>();
            c.tol = p["tol"].get<double>();
            if (c.max_iter < 1)
                problems.push_back("precoding.max_iter: must be >= 1");
            if (!(c.tol > 0.0))
                problems.push_back("precoding.tol: must be positive");
            if (p.contains("eta_grid"))
                c.eta_grid = p["eta_grid"].get<std::vector<double>>();
            if (p.contains("eta"))
                c.eta_grid = {p["eta"].get<double>()};
            for (double e : c.eta_grid)
                if (!(e >= 0.0 && e <= 1.0))
                    problems.push_back("precoding: eta values must lie in [0, 1]");
            if (c.eta_grid.empty())
                problems.push_back("precoding: need at least one eta value");
            else
                c.eta = c.eta_grid.front();
            if (p.contains("closed_switch_grid"))
            {
                c.closed_switch_grid = p["closed_switch_grid"].get<std::vector<int>>();
                for (int n : c.closed_switch_grid)
                    if (n < c.arrays.tx_rf_chains || n > c.arrays.tx_rf_chains * c.arrays.tx_rf_chains)
                        problems.push_back("precoding.closed_switch_grid: entries must lie in [tx_rf_chains, tx_rf_chains^2]");
            }
            if (p.contains("algorithms"))
                c.algorithms = p["algorithms"].get<std::vector<std::string>>();
            if (p.contains("algorithm"))
                c.algorithms = {p["algorithm"].get<std::string>()};
            for (const auto &a : c.algorithms)
                if (a != "vec" && a != "sca")
                    problems.push_back("precoding: unknown algorithm '" + a + "' (expected vec or sca)");
            if (p.contains("sensing_slot"))
            {
                c.sensing_slot = p["sensing_slot"].get<int>();
                if (c.sensing_slot < 1 || c.sensing_slot > c.arrays.tx.w_count)
                    problems.push_back("precoding.sensing_slot: must lie in [1, tx_w]");
            }
        }
        if (r.contains("scene"))
        {
            for (const auto &t : r["scene"]["targets"])
            {
                TargetConfig tc{t["range_m"].get<double>(), t["velocity_mps"].get<double>(), t["azimuth_deg"].get<double>(),
                                t["elevation_deg"].get<double>(), t["snr_db"].get<double>()};
                if (!(tc.range_m > 0.0))
                    problems.push_back("scene.targets: range_m must be positive");
                if (tc.azimuth_deg < -90.0 || tc.azimuth_deg > 90.0)
                    problems.push_back("scene.targets: azimuth_deg must lie in [-90, 90]");
                if (!(tc.elevation_deg > 0.0 && tc.elevation_deg <= 180.0))
                    problems.push_back("scene.targets: elevation_deg must lie in (0, 180]");
                c.targets.push_back(tc);
            }
            if (c.targets.empty())
                problems.push_back("scene.targets: need at least one target");
            c.noise_power = r["scene"]["noise_power"].get<double>();
            if (!(c.noise_power > 0.0))
                problems.push_back("scene.noise_power: must be positive");
        }
        if (r.contains("snr_db"))
            c.snr_db = r["snr_db"].get<double>();
        if (r.contains("snr_db_grid"))
        {
            c.snr_db_grid = r["snr_db_grid"].get<std::vector<double>>();
            if (c.snr_db_grid.empty())
                problems.push_back("snr_db_grid: must not be empty");
        }
        if (r.contains("beam"))
        {
            c.angle_step_deg = r["beam"]["angle_step_deg"].get<double>();
            c.slots = r["beam"]["slots"].get<std::vector<int>>();
            if (!(c.angle_step_deg > 0.0))
                problems.push_back("beam.angle_step_deg: must be positive");
            for (int q : c.slots)
                if (q < 1 || q > c.arrays.tx.w_count)
                    problems.push_back("beam.slots: entries must lie in [1, tx_w]");
        }
        if (r.contains("estimation"))
        {
            const auto &e = r["estimation"];
            if (e.contains("music_step_deg"))
            {
                c.music_step_deg = e["music_step_deg"].get<double>();
                if (!(c.music_step_deg > 0.0))
                    problems.push_back("estimation.music_step_deg: must be positive");
            }
            c.gss_rounds = e["gss_rounds"].get<int>();
            c.gss_iterations = e["gss_iterations"].get<int>();
            c.gss_tol_bins = e["gss_tol_bins"].get<double>();
            if (c.gss_rounds < 1 || c.gss_iterations < 1 || !(c.gss_tol_bins > 0.0))
                problems.push_back("estimation: gss_rounds, gss_iterations, gss_tol_bins must be positive");
            if (e.contains("detection_gate_m"))
                c.detection_gate_m = e["detection_gate_m"].get<double>();
        }
        if (r.contains("control"))
        {
            c.control_delta_f_khz = r["control"]["delta_f_khz"].get<double>();
            c.control_velocity_mps = r["control"]["velocity_mps"].get<double>();
            if (!(c.control_delta_f_khz > 0.0))
                problems.push_back("control.delta_f_khz: must be positive");
        }
        if (!problems.empty())
            throw ConfigError(problems);
        return c;
    }

    inline json read_json_file(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError({"cannot open config file '" + path + "'"});
        try
        {
            return json::parse(in);
        }
        catch (const json::parse_error &e)
        {
            throw ConfigError({"config file '" + path + "' is not valid JSON: " + e.what()});
        }
    }

    // --seed and --trials overrides are applied through the resolved document so the hash covers them
    inline ExperimentConfig load_config(const std::string &experiment, json user, std::optional<std::uint64_t> seed, std::optional<int> trials)
    {
        if (user.is_null())
            user = json::object();
        if (!user.is_object())
            throw ConfigError({"config root must be a JSON object"});
        if (seed)
            user["seed"] = *seed;
        if (trials)
            user["trials"] = *trials;
        return load_config(experiment, user);
    }

} // namespace thz::harness

#endif
