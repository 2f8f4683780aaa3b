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

#ifndef THZISAC_HARNESS_EXPERIMENTS_HPP
#define THZISAC_HARNESS_EXPERIMENTS_HPP

#include "../channel.hpp"
#include "../geometry.hpp"
#include "../isi_ici.hpp"
#include "../precoding.hpp"
#include "../sensing_rx.hpp"
#include "../waveform.hpp"
#include "config.hpp"
#include "output.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace thz::harness
{
    inline constexpr double kBroadside = kPi / 2; // elevation of every scan

    inline std::uint64_t experiment_id(const std::string &name) { return detail::fnv1a(name); }

    // Independent stream per (experiment, trial)
    inline RngStream trial_stream(const ExperimentConfig &c, int trial)
    {
        return RngStream(derive_seed(c.seed, experiment_id(c.experiment), std::uint64_t(trial)));
    }

    struct Link
    {
        channel::CommChannel channel;
        precoding::FullyDigital digital;
    };

    inline Link random_link(const ExperimentConfig &c, RngStream &rng)
    {
        auto ch = channel::random_comm_channel(c.comm, c.frame, c.arrays.tx, c.arrays.rx, rng);
        auto fd = precoding::optimal_fully_digital(ch, c.arrays.streams);
        return {std::move(ch), std::move(fd)};
    }

    inline precoding::VecOptions vec_options(const ExperimentConfig &c, std::uint64_t seed) { return {c.max_iter, c.tol, seed}; }

    // Hybrid design for one slot. SCA starts from the communication-only (eta = 1) VEC design; pass it
    // in when several designs share one channel.
    inline precoding::HybridPrecoder design_precoder(const std::string &algorithm, const precoding::FullyDigital &fd,
                                                     const geometry::SensingCodebook &cb, int q, double eta,
                                                     const precoding::SwitchMatrix &sw, const precoding::VecOptions &opt,
                                                     const precoding::HybridPrecoder *comm_only = nullptr)
    {
        const int ns = int(fd.precoders.front().cols());
        if (algorithm == "vec")
            return precoding::vec_hybrid_precoding({fd.precoders, precoding::optimal_sensing_precoder(cb, q, ns), eta}, sw, opt);
        if (algorithm == "sca")
        {
            precoding::HybridPrecoder base;
            if (!comm_only)
            {
                base = design_precoder("vec", fd, cb, q, 1.0, sw, opt);
                comm_only = &base;
            }
            return precoding::sca_hybrid_precoding(fd.precoders, cb, q, eta, comm_only->analog);
        }
        throw std::invalid_argument("unknown precoding algorithm '" + algorithm + "'");
    }

    inline std::vector<CMatrix> repeat(const CMatrix &f, int count) { return std::vector<CMatrix>(std::size_t(count), f); }

    inline double mean(const std::vector<double> &v)
    {
        return v.empty() ? std::numeric_limits<double>::quiet_NaN() : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    }

    // ---------------------------------------------------------------------
    // Spectral efficiency versus sensing gain
    // ---------------------------------------------------------------------

    inline ExperimentOutput run_tradeoff(const ExperimentConfig &c)
    {
        const auto &A = c.arrays;
        const auto cb = geometry::dft_codebook(A.tx, kBroadside);
        const int q = c.sensing_slot;
        const double omega = cb.direction(q);
        const double rho = db2lin(c.snr_db);
        const std::size_t n_alg = c.algorithms.size(), n_nc = c.closed_switch_grid.size(), n_eta = c.eta_grid.size();
        auto index = [&](std::size_t a, std::size_t k, std::size_t e)
        { return (a * n_nc + k) * n_eta + e; };

        struct Trial
        {
            std::vector<double> se, gain; // per design
            double digital_se = 0, digital_gain = 0, codebook_se = 0, codebook_gain = 0;
            int not_converged = 0;
        };
        auto trials = parallel_map<Trial>(c.trials, c.threads, [&](int t)
                                          {
            auto rng = trial_stream(c, t);
            const Link link = random_link(c, rng);
            const auto opt = vec_options(c, rng.engine()());
            Trial r;
            r.se.resize(n_alg * n_nc * n_eta);
            r.gain.resize(r.se.size());
            for (std::size_t k = 0; k < n_nc; ++k)
            {
                const auto sw = precoding::SwitchMatrix::with_count(A.tx_rf_chains, c.closed_switch_grid[k], A.tx.size());
                const auto comm_only = design_precoder("vec", link.digital, cb, q, 1.0, sw, opt);
                for (std::size_t a = 0; a < n_alg; ++a)
                    for (std::size_t e = 0; e < n_eta; ++e)
                    {
                        const double eta = c.eta_grid[e];
                        const auto prec = (c.algorithms[a] == "vec" && eta == 1.0)
                                              ? comm_only
                                              : design_precoder(c.algorithms[a], link.digital, cb, q, eta, sw, opt, &comm_only);
                        r.not_converged += prec.converged ? 0 : 1;
                        r.se[index(a, k, e)] = precoding::spectral_efficiency(link.channel, prec, link.digital.combiners, rho, 1.0).bits;
                        r.gain[index(a, k, e)] = precoding::transmit_beampattern_linear(prec, {omega}, kBroadside, A.tx)(0);
                    }
            }
            r.digital_se = precoding::spectral_efficiency(link.channel, link.digital.precoders, link.digital.combiners, rho, 1.0).bits;
            r.digital_gain = precoding::transmit_beampattern_linear(link.digital.precoders, {omega}, kBroadside, A.tx)(0);
            const auto fs = repeat(precoding::optimal_sensing_precoder(cb, q, A.streams), c.frame.m_subcarriers);
            r.codebook_se = precoding::spectral_efficiency(link.channel, fs, link.digital.combiners, rho, 1.0).bits;
            r.codebook_gain = precoding::transmit_beampattern_linear(std::vector<CMatrix>{fs.front()}, {omega}, kBroadside, A.tx)(0);
            return r; });

        auto avg = [&](auto get)
        {
            std::vector<double> v;
            for (const auto &t : trials)
                v.push_back(get(t));
            return mean(v);
        };
        ExperimentOutput out;
        CsvTable table({"algorithm", "closed_switches", "eta", "spectral_efficiency_bps_hz", "sensing_gain_dbi", "trials"});
        json curves = json::array();
        const double codebook_gain = lin2db(avg([](const Trial &t)
                                                { return t.codebook_gain; }));
        int not_converged = 0;
        for (const auto &t : trials)
            not_converged += t.not_converged;
        for (std::size_t a = 0; a < n_alg; ++a)
            for (std::size_t k = 0; k < n_nc; ++k)
            {
                std::vector<double> se(n_eta), gain(n_eta);
                for (std::size_t e = 0; e < n_eta; ++e)
                {
                    const auto i = index(a, k, e);
                    se[e] = avg([&](const Trial &t)
                                { return t.se[i]; });
                    gain[e] = lin2db(avg([&](const Trial &t)
                                         { return t.gain[i]; }));
                    table.add(c.algorithms[a], c.closed_switch_grid[k], c.eta_grid[e], se[e], gain[e], c.trials);
                }
                // points ordered by eta: gain should fall while SE rises
                std::vector<std::size_t> order(n_eta);
                std::iota(order.begin(), order.end(), std::size_t(0));
                std::stable_sort(order.begin(), order.end(), [&](auto x, auto y)
                                 { return c.eta_grid[x] < c.eta_grid[y]; });
                // designs that coincide across eta (e.g. the same SCA block count) differ only by rounding
                auto tie = [](double a, double b)
                { return 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
                bool monotone = true;
                for (std::size_t i = 1; i < n_eta; ++i)
                {
                    const auto cur = order[i], prev = order[i - 1];
                    monotone = monotone && se[cur] >= se[prev] - tie(se[cur], se[prev]) && gain[cur] <= gain[prev] + tie(gain[cur], gain[prev]);
                }
                json curve = {{"algorithm", c.algorithms[a]}, {"closed_switches", c.closed_switch_grid[k]}, {"front_monotone", monotone}};
                const auto lo = order.front(), hi = order.back();
                curve["eta_low"] = c.eta_grid[lo];
                curve["eta_high"] = c.eta_grid[hi];
                curve["gain_gap_to_codebook_db_at_eta_low"] = codebook_gain - gain[lo];
                curve["se_gain_eta_high_minus_low_bps_hz"] = se[hi] - se[lo];
                curves.push_back(curve);
            }
        const double digital_se = avg([](const Trial &t)
                                      { return t.digital_se; });
        table.add("fully_digital", 0, 1.0, digital_se, lin2db(avg([](const Trial &t)
                                                                  { return t.digital_gain; })),
                  c.trials);
        table.add("codebook", 0, 0.0, avg([](const Trial &t)
                                          { return t.codebook_se; }),
                  codebook_gain, c.trials);
        out.tables.emplace_back("tradeoff", std::move(table));
        out.summary = {{"snr_db", c.snr_db},
                       {"sensing_slot", q},
                       {"sensing_direction_deg", rad2deg(omega)},
                       {"codebook_gain_dbi", codebook_gain},
                       {"fully_digital_se_bps_hz", digital_se},
                       {"curves", curves},
                       {"designs_not_converged", not_converged}};
        return out;
    }

    // ---------------------------------------------------------------------
    // Spectral efficiency versus SNR
    // ---------------------------------------------------------------------

    inline ExperimentOutput run_se_sweep(const ExperimentConfig &c)
    {
        const auto &A = c.arrays;
        const auto cb = geometry::dft_codebook(A.tx, kBroadside);
        const int q = c.sensing_slot;
        const std::size_t n_alg = c.algorithms.size(), n_nc = c.closed_switch_grid.size(), n_eta = c.eta_grid.size(),
                          n_snr = c.snr_db_grid.size();
        auto index = [&](std::size_t a, std::size_t k, std::size_t e, std::size_t s)
        { return ((a * n_nc + k) * n_eta + e) * n_snr + s; };

        struct Trial
        {
            std::vector<double> se, digital;
            int not_converged = 0;
        };
        auto trials = parallel_map<Trial>(c.trials, c.threads, [&](int t)
                                          {
            auto rng = trial_stream(c, t);
            const Link link = random_link(c, rng);
            const auto opt = vec_options(c, rng.engine()());
            Trial r;
            r.se.resize(n_alg * n_nc * n_eta * n_snr);
            for (std::size_t k = 0; k < n_nc; ++k)
            {
                const auto sw = precoding::SwitchMatrix::with_count(A.tx_rf_chains, c.closed_switch_grid[k], A.tx.size());
                const auto comm_only = design_precoder("vec", link.digital, cb, q, 1.0, sw, opt);
                for (std::size_t a = 0; a < n_alg; ++a)
                    for (std::size_t e = 0; e < n_eta; ++e)
                    {
                        const double eta = c.eta_grid[e];
                        const auto prec = (c.algorithms[a] == "vec" && eta == 1.0)
                                              ? comm_only
                                              : design_precoder(c.algorithms[a], link.digital, cb, q, eta, sw, opt, &comm_only);
                        r.not_converged += prec.converged ? 0 : 1;
                        for (std::size_t s = 0; s < n_snr; ++s)
                            r.se[index(a, k, e, s)] =
                                precoding::spectral_efficiency(link.channel, prec, link.digital.combiners, db2lin(c.snr_db_grid[s]), 1.0).bits;
                    }
            }
            for (double snr : c.snr_db_grid)
                r.digital.push_back(precoding::spectral_efficiency(link.channel, link.digital.precoders, link.digital.combiners, db2lin(snr), 1.0).bits);
            return r; });

        auto avg = [&](auto get)
        {
            std::vector<double> v;
            for (const auto &t : trials)
                v.push_back(get(t));
            return mean(v);
        };
        CsvTable table({"algorithm", "closed_switches", "eta", "snr_db", "spectral_efficiency_bps_hz", "trials"});
        std::vector<double> se(n_alg * n_nc * n_eta * n_snr), digital(n_snr);
        for (std::size_t s = 0; s < n_snr; ++s)
            digital[s] = avg([&](const Trial &t)
                             { return t.digital[s]; });
        for (std::size_t a = 0; a < n_alg; ++a)
            for (std::size_t k = 0; k < n_nc; ++k)
                for (std::size_t e = 0; e < n_eta; ++e)
                    for (std::size_t s = 0; s < n_snr; ++s)
                    {
                        const auto i = index(a, k, e, s);
                        se[i] = avg([&](const Trial &t)
                                    { return t.se[i]; });
                        table.add(c.algorithms[a], c.closed_switch_grid[k], c.eta_grid[e], c.snr_db_grid[s], se[i], c.trials);
                    }
        for (std::size_t s = 0; s < n_snr; ++s)
            table.add("fully_digital", 0, 1.0, c.snr_db_grid[s], digital[s], c.trials);

        // SE lost between the largest and smallest eta, and the ratio to fully digital at the largest eta
        const auto e_hi = std::size_t(std::max_element(c.eta_grid.begin(), c.eta_grid.end()) - c.eta_grid.begin());
        const auto e_lo = std::size_t(std::min_element(c.eta_grid.begin(), c.eta_grid.end()) - c.eta_grid.begin());
        json drops = json::array();
        for (std::size_t a = 0; a < n_alg; ++a)
            for (std::size_t k = 0; k < n_nc; ++k)
                for (std::size_t s = 0; s < n_snr; ++s)
                    drops.push_back({{"algorithm", c.algorithms[a]},
                                     {"closed_switches", c.closed_switch_grid[k]},
                                     {"snr_db", c.snr_db_grid[s]},
                                     {"eta_high", c.eta_grid[e_hi]},
                                     {"eta_low", c.eta_grid[e_lo]},
                                     {"se_drop_bps_hz", se[index(a, k, e_hi, s)] - se[index(a, k, e_lo, s)]},
                                     {"ratio_to_fully_digital_at_eta_high", se[index(a, k, e_hi, s)] / digital[s]}});
        int not_converged = 0;
        for (const auto &t : trials)
            not_converged += t.not_converged;
        ExperimentOutput out;
        out.tables.emplace_back("se_sweep", std::move(table));
        out.summary = {{"sensing_slot", q}, {"comparisons", drops}, {"designs_not_converged", not_converged}};
        return out;
    }

    // ---------------------------------------------------------------------
    // Beam scanning across slots
    // ---------------------------------------------------------------------

    inline ExperimentOutput run_beam_scan(const ExperimentConfig &c)
    {
        const auto &A = c.arrays;
        const auto cb = geometry::dft_codebook(A.tx, kBroadside);
        std::vector<int> slots = c.slots;
        if (slots.empty())
            for (int q = 1; q <= A.tx.w_count; ++q)
                slots.push_back(q);
        std::vector<double> grid;
        for (int i = 0;; ++i)
        {
            const double deg = -90.0 + i * c.angle_step_deg;
            if (deg > 90.0 + 1e-9)
                break;
            grid.push_back(deg2rad(std::min(deg, 90.0)));
        }
        const auto sw = precoding::SwitchMatrix::with_count(A.tx_rf_chains, A.closed_switches, A.tx.size());
        const std::string algorithm = c.algorithms.front();

        struct Lobe
        {
            RVector pattern_dbi;
            double peak_deg = 0, peak_dbi = 0, comm_deg = 0, comm_dbi = 0;
            bool in_window = false;
        };
        const int n_slots = int(slots.size());
        auto lobes = parallel_map<Lobe>(c.trials * n_slots, c.threads, [&](int job)
                                        {
            const int t = job / n_slots, q = slots[std::size_t(job % n_slots)];
            auto rng = trial_stream(c, t);
            const Link link = random_link(c, rng);
            const auto opt = vec_options(c, rng.engine()());
            const auto prec = design_precoder(algorithm, link.digital, cb, q, c.eta, sw, opt);
            Lobe l;
            l.pattern_dbi = precoding::transmit_beampattern(prec, grid, kBroadside, A.tx);
            // climb from the grid point nearest omega_q to the local maximum of the sensing lobe
            const double omega = cb.direction(q);
            std::size_t i = 0;
            for (std::size_t k = 1; k < grid.size(); ++k)
                if (std::abs(grid[k] - omega) < std::abs(grid[i] - omega))
                    i = k;
            for (bool moved = true; moved;)
            {
                moved = false;
                if (i + 1 < grid.size() && l.pattern_dbi(Eigen::Index(i + 1)) > l.pattern_dbi(Eigen::Index(i)))
                {
                    ++i;
                    moved = true;
                }
                else if (i > 0 && l.pattern_dbi(Eigen::Index(i - 1)) > l.pattern_dbi(Eigen::Index(i)))
                {
                    --i;
                    moved = true;
                }
            }
            l.peak_deg = rad2deg(grid[i]);
            l.peak_dbi = l.pattern_dbi(Eigen::Index(i));
            l.in_window = geometry::sensing_window(q, A.tx).contains(grid[i]);
            const double los = link.channel.paths().front().aod_theta;
            l.comm_deg = rad2deg(los);
            l.comm_dbi = precoding::transmit_gain_dbi(prec, los, kBroadside, A.tx);
            return l; });

        CsvTable pattern({"trial", "slot", "angle_deg", "gain_dbi"});
        CsvTable summary_rows({"trial", "slot", "window_lo_deg", "window_hi_deg", "codebook_angle_deg", "sensing_peak_angle_deg",
                               "sensing_peak_gain_dbi", "peak_in_window", "comm_angle_deg", "comm_gain_dbi"});
        bool all_in_window = true;
        double max_drift = 0.0;
        std::vector<double> peaks;
        for (int t = 0; t < c.trials; ++t)
        {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (int s = 0; s < n_slots; ++s)
            {
                const auto &l = lobes[std::size_t(t * n_slots + s)];
                const int q = slots[std::size_t(s)];
                for (std::size_t i = 0; i < grid.size(); ++i)
                    pattern.add(t, q, rad2deg(grid[i]), l.pattern_dbi(Eigen::Index(i)));
                const auto w = geometry::sensing_window(q, A.tx);
                summary_rows.add(t, q, rad2deg(w.lo), rad2deg(w.hi), rad2deg(cb.direction(q)), l.peak_deg, l.peak_dbi, l.in_window, l.comm_deg,
                                 l.comm_dbi);
                all_in_window = all_in_window && l.in_window;
                lo = std::min(lo, l.comm_dbi);
                hi = std::max(hi, l.comm_dbi);
                peaks.push_back(l.peak_dbi);
            }
            max_drift = std::max(max_drift, hi - lo);
        }
        // windows of all slots tile [-90, 90] deg
        bool tiled = true;
        for (int q = 1; q <= A.tx.w_count; ++q)
        {
            const auto w = geometry::sensing_window(q, A.tx);
            if (q == 1)
                tiled = tiled && w.lo == -kPi / 2;
            else
                tiled = tiled && w.lo == geometry::sensing_window(q - 1, A.tx).hi;
            if (q == A.tx.w_count)
                tiled = tiled && w.hi == kPi / 2;
        }
        ExperimentOutput out;
        out.tables.emplace_back("beam_scan", std::move(pattern));
        out.tables.emplace_back("beam_scan_lobes", std::move(summary_rows));
        out.summary = {{"eta", c.eta},
                       {"algorithm", algorithm},
                       {"mean_sensing_peak_gain_dbi", mean(peaks)},
                       {"min_sensing_peak_gain_dbi", *std::min_element(peaks.begin(), peaks.end())},
                       {"max_sensing_peak_gain_dbi", *std::max_element(peaks.begin(), peaks.end())},
                       {"all_peaks_in_window", all_in_window},
                       {"max_comm_gain_drift_db", max_drift},
                       {"windows_tile_half_plane", tiled}};
        return out;
    }

    // ---------------------------------------------------------------------
    // Angle / range / velocity RMSE
    // ---------------------------------------------------------------------

    struct ErrorStats
    {
        int count = 0, detected = 0;
        double rmse_angle_deg = 0, rmse_range_m = 0, rmse_velocity_mps = 0;
        double ci_angle_deg = 0, ci_range_m = 0, ci_velocity_mps = 0; // 95% half-widths
        bool unreliable() const { return detected < 0.5 * count; }
    };

    namespace detail
    {
        // RMSE and a 95% normal-approximation half-width from the spread of the squared errors
        inline std::pair<double, double> rmse_with_ci(const std::vector<double> &err)
        {
            if (err.empty())
                return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
            std::vector<double> sq;
            for (double e : err)
                sq.push_back(e * e);
            const double mse = mean(sq);
            double var = 0.0;
            for (double s : sq)
                var += (s - mse) * (s - mse);
            var = err.size() > 1 ? var / double(err.size() - 1) : 0.0;
            const double half = 1.96 * std::sqrt(var / double(err.size()));
            return {std::sqrt(mse), 0.5 * (std::sqrt(mse + half) - std::sqrt(std::max(0.0, mse - half)))};
        }
    } // namespace detail

    struct TargetEstimate
    {
        bool detected = false;
        double angle_deg = std::numeric_limits<double>::quiet_NaN();
        double range_m = std::numeric_limits<double>::quiet_NaN();
        double velocity_mps = std::numeric_limits<double>::quiet_NaN();
    };

    inline ExperimentOutput run_mc_rmse(const ExperimentConfig &c)
    {
        const auto &A = c.arrays;
        const auto &F = c.frame;
        const auto cb = geometry::dft_codebook(A.tx, kBroadside);
        const auto sw = precoding::SwitchMatrix::with_count(A.tx_rf_chains, A.closed_switches, A.tx.size());
        const auto rx_sw = precoding::SwitchMatrix::with_count(A.rx_rf_chains, A.rx_closed_switches, A.rx.size());
        const std::string algorithm = c.algorithms.front();
        const AlternatingSearch search{c.gss_rounds, c.gss_iterations, c.gss_tol_bins, c.gss_tol_bins};
        const int P = int(c.targets.size());
        const double range_bin = kSpeedOfLight / (2.0 * F.m_subcarriers * F.delta_f);

        // slots that illuminate at least one target
        std::vector<int> target_slot;
        std::map<int, std::vector<int>> by_slot;
        for (int p = 0; p < P; ++p)
        {
            const int q = geometry::slot_for_target(deg2rad(c.targets[std::size_t(p)].azimuth_deg), A.tx);
            target_slot.push_back(q);
            by_slot[q].push_back(p);
        }
        for (const auto &[q, members] : by_slot)
            if (int(members.size()) >= A.rx_rf_chains)
                throw ConfigError({"scene.targets: slot " + std::to_string(q) + " holds " + std::to_string(members.size()) +
                                   " targets; MUSIC needs fewer than rx_rf_chains"});

        const std::size_t n_eta = c.eta_grid.size(), n_snr = c.snr_db_grid.size();
        using TrialResult = std::vector<TargetEstimate>; // [(eta * n_snr + snr) * P + p]
        auto trials = parallel_map<TrialResult>(c.trials, c.threads, [&](int t)
                                                {
            auto rng = trial_stream(c, t);
            const Link link = random_link(c, rng);
            const auto opt = vec_options(c, rng.engine()());
            const auto sym = waveform::generate_symbols(F, A.streams, waveform::Constellation::qpsk, rng);
            std::vector<double> phases;
            for (int p = 0; p < P; ++p)
                phases.push_back(rng.phase());
            std::map<int, sensing::ReceiveCombiner> combiners;
            for (const auto &[q, members] : by_slot)
                combiners.emplace(q, sensing::receive_combiner(geometry::sensing_window(q, A.tx).mirrored(), A.rx_rf_chains, A.rx, rng, &rx_sw));

            TrialResult r(n_eta * n_snr * std::size_t(P));
            for (std::size_t e = 0; e < n_eta; ++e)
                for (const auto &[q, members] : by_slot)
                {
                    const auto prec = design_precoder(algorithm, link.digital, cb, q, c.eta_grid[e], sw, opt);
                    const auto &comb = combiners.at(q);
                    const auto window = geometry::sensing_window(q, A.tx).mirrored();
                    for (std::size_t s = 0; s < n_snr; ++s)
                    {
                        channel::SensingScene scene;
                        scene.noise_power = c.noise_power;
                        for (int p = 0; p < P; ++p)
                        {
                            const auto &tc = c.targets[std::size_t(p)];
                            // per-antenna reference SNR: |h|^2 Nt / (P sigma^2) = SNR
                            const double mag = std::sqrt(db2lin(tc.snr_db + c.snr_db_grid[s]) * P * c.noise_power / A.tx.size());
                            scene.targets.push_back({tc.range_m, tc.velocity_mps, deg2rad(tc.azimuth_deg), deg2rad(tc.elevation_deg),
                                                     mag * cis(phases[std::size_t(p)])});
                        }
                        auto noise = rng.child((e * n_snr + s) * 1000 + std::size_t(q));
                        const auto block = sensing::simulate_rx(scene, prec, sym, comb, F, q, A.tx, A.rx, c.noise_power, noise);
                        const auto music = sensing::music_spectrum(block, comb, int(members.size()), window, A.rx, {deg2rad(c.music_step_deg)});

                        // assign MUSIC peaks to targets by smallest angle error
                        std::vector<std::tuple<double, std::size_t, int>> pairs;
                        for (std::size_t k = 0; k < music.peaks.size(); ++k)
                            for (int p : members)
                                pairs.emplace_back(std::abs(music.peaks[k] - scene.targets[std::size_t(p)].azimuth), k, p);
                        std::stable_sort(pairs.begin(), pairs.end(), [](const auto &x, const auto &y)
                                         { return std::get<0>(x) < std::get<0>(y); });
                        std::set<std::size_t> used_peak;
                        std::set<int> used_target;
                        for (const auto &[err, k, p] : pairs)
                        {
                            if (used_peak.count(k) || used_target.count(p))
                                continue;
                            used_peak.insert(k);
                            used_target.insert(p);
                            const double theta = music.peaks[k];
                            const auto ref = sensing::reconstruct_reference(theta, comb.elevation, prec, sym, comb, A.tx, A.rx);
                            const auto dd = sensing::estimate_delay_doppler(block, ref, F, search);
                            auto &est = r[(e * n_snr + s) * std::size_t(P) + std::size_t(p)];
                            est.angle_deg = rad2deg(theta);
                            est.range_m = dd.range_hat;
                            est.velocity_mps = dd.velocity_hat;
                            est.detected = std::abs(dd.range_hat - c.targets[std::size_t(p)].range_m) <= range_bin;
                        }
                    }
                }
            return r; });

        CsvTable rows({"eta", "snr_db", "trials", "n_detected", "unreliable", "rmse_angle_deg", "rmse_angle_ci_deg", "rmse_range_m", "rmse_range_ci_m",
                       "rmse_velocity_mps", "rmse_velocity_ci_mps"});
        CsvTable per_trial({"eta", "snr_db", "trial", "target_index", "detected", "est_angle_deg", "est_range_m", "est_velocity_mps",
                            "angle_error_deg", "range_error_m", "velocity_error_mps"});
        json stats = json::array();
        for (std::size_t e = 0; e < n_eta; ++e)
            for (std::size_t s = 0; s < n_snr; ++s)
            {
                std::vector<double> ea, er, ev;
                ErrorStats st;
                for (int t = 0; t < c.trials; ++t)
                    for (int p = 0; p < P; ++p)
                    {
                        const auto &est = trials[std::size_t(t)][(e * n_snr + s) * std::size_t(P) + std::size_t(p)];
                        const auto &tc = c.targets[std::size_t(p)];
                        const double da = est.angle_deg - tc.azimuth_deg, dr = est.range_m - tc.range_m, dv = est.velocity_mps - tc.velocity_mps;
                        per_trial.add(c.eta_grid[e], c.snr_db_grid[s], t, p, est.detected, est.angle_deg, est.range_m, est.velocity_mps, da, dr, dv);
                        ++st.count;
                        if (!est.detected)
                            continue;
                        ++st.detected;
                        ea.push_back(da);
                        er.push_back(dr);
                        ev.push_back(dv);
                    }
                std::tie(st.rmse_angle_deg, st.ci_angle_deg) = detail::rmse_with_ci(ea);
                std::tie(st.rmse_range_m, st.ci_range_m) = detail::rmse_with_ci(er);
                std::tie(st.rmse_velocity_mps, st.ci_velocity_mps) = detail::rmse_with_ci(ev);
                rows.add(c.eta_grid[e], c.snr_db_grid[s], st.count, st.detected, st.unreliable(), st.rmse_angle_deg, st.ci_angle_deg, st.rmse_range_m,
                         st.ci_range_m, st.rmse_velocity_mps, st.ci_velocity_mps);
                stats.push_back({{"eta", c.eta_grid[e]},
                                 {"snr_db", c.snr_db_grid[s]},
                                 {"n_detected", st.detected},
                                 {"count", st.count},
                                 {"unreliable", st.unreliable()},
                                 {"rmse_angle_deg", st.rmse_angle_deg},
                                 {"rmse_range_m", st.rmse_range_m},
                                 {"rmse_velocity_mps", st.rmse_velocity_mps}});
            }

        channel::SensingScene truth;
        for (const auto &tc : c.targets)
            truth.targets.push_back({tc.range_m, tc.velocity_mps, deg2rad(tc.azimuth_deg), deg2rad(tc.elevation_deg)});
        const auto model = channel::check_isi_ici_free(truth, F);
        json warnings = json::array();
        if (!model.delay_within_cp)
            warnings.push_back("a target delay exceeds the cyclic prefix; the frequency-domain echo model ignores the resulting ISI");
        if (!model.doppler_negligible)
            warnings.push_back("a target Doppler exceeds 5% of the subcarrier spacing; the frequency-domain echo model ignores the resulting ICI");

        ExperimentOutput out;
        out.tables.emplace_back("mc_rmse", std::move(rows));
        out.tables.emplace_back("mc_rmse_trials", std::move(per_trial));
        out.summary = {{"algorithm", algorithm},
                       {"target_slots", target_slot},
                       {"detection_gate_m", range_bin},
                       {"stats", stats},
                       {"model_warnings", warnings}};
        return out;
    }

    // ---------------------------------------------------------------------
    // ISI / ICI demonstrations
    // ---------------------------------------------------------------------

    struct DemoMatch
    {
        double est_range = std::numeric_limits<double>::quiet_NaN();
        double est_velocity = std::numeric_limits<double>::quiet_NaN();
        bool detected = false;
    };

    // Assigns estimates to true targets by smallest range error first; a target counts as
    // detected when its assigned estimate lies within `gate` meters.
    inline std::vector<DemoMatch> match_by_range(const std::vector<isi::Detection> &dets, const std::vector<double> &ranges, double gate)
    {
        std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
        for (std::size_t d = 0; d < dets.size(); ++d)
            for (std::size_t p = 0; p < ranges.size(); ++p)
                pairs.emplace_back(std::abs(dets[d].estimate.range_hat - ranges[p]), d, p);
        std::stable_sort(pairs.begin(), pairs.end(), [](const auto &x, const auto &y)
                         { return std::get<0>(x) < std::get<0>(y); });
        std::vector<DemoMatch> out(ranges.size());
        std::vector<bool> used_d(dets.size()), used_p(ranges.size());
        for (const auto &[err, d, p] : pairs)
        {
            if (used_d[d] || used_p[p])
                continue;
            used_d[d] = used_p[p] = true;
            out[p] = {dets[d].estimate.range_hat, dets[d].estimate.velocity_hat, err <= gate};
        }
        return out;
    }

    // Unit-power QPSK grid
    inline CMatrix qpsk_grid(int rows, int cols, RngStream &rng)
    {
        CMatrix g(rows, cols);
        const double a = 1.0 / std::sqrt(2.0);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
            {
                const auto bits = rng.engine()();
                g(i, j) = {(bits & 1) ? a : -a, (bits & 2) ? a : -a};
            }
        return g;
    }

    inline ExperimentOutput run_echo_demo(const ExperimentConfig &c)
    {
        const int P = int(c.targets.size());
        const AlternatingSearch search{c.gss_rounds, c.gss_iterations, c.gss_tol_bins, c.gss_tol_bins};
        const isi::TackledOptions opt{P, search};
        waveform::FrameConfig control = c.frame;
        control.delta_f = c.control_delta_f_khz * 1e3;
        const std::vector<std::string> scenario_names{"main", "control"};
        const std::vector<std::string> estimator_names{"unaware", "tackled"};

        std::vector<double> ranges;
        for (const auto &t : c.targets)
            ranges.push_back(t.range_m);
        double max_range = 0.0;
        for (double r : ranges)
            max_range = std::max(max_range, r);

        struct Run
        {
            std::vector<std::vector<DemoMatch>> matches; // [estimator][target]
            RVector unaware_profile, tackled_profile;    // normalized, first pass
            double tackled_delay_step = 0.0;
        };
        struct Trial
        {
            Run runs[2];
        };
        auto trials = parallel_map<Trial>(c.trials, c.threads, [&](int t)
                                          {
            auto rng = trial_stream(c, t);
            Trial tr;
            for (int sc = 0; sc < 2; ++sc)
            {
                const auto &F = sc == 0 ? c.frame : control;
                std::vector<isi::EchoPath> paths;
                for (const auto &tc : c.targets)
                {
                    const double v = sc == 0 ? tc.velocity_mps : c.control_velocity_mps;
                    paths.push_back({channel::delay_of_range(tc.range_m), channel::doppler_of_velocity(v, F.fc),
                                     std::sqrt(db2lin(tc.snr_db) * c.noise_power) * cis(rng.phase())});
                }
                isi::ExtendedTxPair x{qpsk_grid(F.m_subcarriers, F.n_symbols, rng), qpsk_grid(F.m_subcarriers, F.n_symbols, rng)};
                auto noise = rng.child(std::uint64_t(sc));
                const CMatrix y = isi::isi_ici_rx(paths, x, F, c.noise_power, noise);

                std::vector<isi::Detection> unaware, tackled;
                std::vector<isi::TackledCoarse> coarse;
                try
                {
                    unaware = isi::unaware_estimate(y, x.curr, F, opt);
                }
                catch (const std::runtime_error &)
                {
                }
                try
                {
                    tackled = isi::tackled_estimate(y, x, F, opt, &coarse);
                }
                catch (const std::runtime_error &)
                {
                }
                Run &run = tr.runs[sc];
                run.matches.push_back(match_by_range(unaware, ranges, c.detection_gate_m));
                run.matches.push_back(match_by_range(tackled, ranges, c.detection_gate_m));
                if (t == 0)
                {
                    const CMatrix z = (x.curr.array().conjugate() * y.array()).matrix();
                    const auto g = sensing::sdft_coarse(z);
                    run.unaware_profile = g.profile.rowwise().maxCoeff();
                    run.unaware_profile /= run.unaware_profile.maxCoeff();
                    if (!coarse.empty())
                    {
                        run.tackled_delay_step = coarse.front().delay_step;
                        run.tackled_profile = coarse.front().objective.rowwise().maxCoeff();
                        run.tackled_profile /= run.tackled_profile.maxCoeff();
                    }
                }
            }
            return tr; });

        CsvTable profiles({"scenario", "estimator", "range_m", "normalized_power"});
        for (int sc = 0; sc < 2; ++sc)
        {
            const auto &run = trials.front().runs[sc];
            const auto &F = sc == 0 ? c.frame : control;
            const double bin = kSpeedOfLight / (2.0 * F.m_subcarriers * F.delta_f);
            for (Eigen::Index m = 0; m < run.unaware_profile.size(); ++m)
                profiles.add(scenario_names[std::size_t(sc)], "unaware", double(m) * bin, run.unaware_profile(m));
            // the tackled axis spans a whole slot; keep the span of interest
            const double limit = std::max(kSpeedOfLight / (2.0 * F.delta_f), 2.0 * max_range);
            for (Eigen::Index i = 0; i < run.tackled_profile.size(); ++i)
            {
                const double r = channel::range_of_delay(double(i) * run.tackled_delay_step);
                if (r > limit)
                    break;
                profiles.add(scenario_names[std::size_t(sc)], "tackled", r, run.tackled_profile(i));
            }
        }

        CsvTable estimates({"scenario", "trial", "estimator", "target_index", "true_range_m", "est_range_m", "range_error_m", "true_velocity_mps",
                            "est_velocity_mps", "velocity_error_mps", "detected"});
        json per_target = json::array();
        for (int sc = 0; sc < 2; ++sc)
            for (std::size_t k = 0; k < 2; ++k)
                for (int p = 0; p < P; ++p)
                {
                    const auto &tc = c.targets[std::size_t(p)];
                    const double v = sc == 0 ? tc.velocity_mps : c.control_velocity_mps;
                    int detected = 0;
                    double max_err = 0.0;
                    bool any_missing = false;
                    for (int t = 0; t < c.trials; ++t)
                    {
                        const auto &m = trials[std::size_t(t)].runs[sc].matches[k][std::size_t(p)];
                        const double err = m.est_range - tc.range_m;
                        estimates.add(scenario_names[std::size_t(sc)], t, estimator_names[k], p, tc.range_m, m.est_range, err, v, m.est_velocity,
                                      m.est_velocity - v, m.detected);
                        detected += m.detected ? 1 : 0;
                        if (std::isnan(err))
                            any_missing = true;
                        else
                            max_err = std::max(max_err, std::abs(err));
                    }
                    per_target.push_back({{"scenario", scenario_names[std::size_t(sc)]},
                                          {"estimator", estimator_names[k]},
                                          {"target_index", p},
                                          {"range_m", tc.range_m},
                                          {"snr_db", tc.snr_db},
                                          {"n_detected", detected},
                                          {"trials", c.trials},
                                          {"max_abs_range_error_m", any_missing ? json(nullptr) : json(max_err)}});
                }

        // both estimators should agree when neither impairment is present
        double agreement = 0.0;
        for (int t = 0; t < c.trials; ++t)
            for (int p = 0; p < P; ++p)
            {
                const auto &runs = trials[std::size_t(t)].runs[1].matches;
                agreement = std::max(agreement, std::abs(runs[0][std::size_t(p)].est_range - runs[1][std::size_t(p)].est_range));
            }

        ExperimentOutput out;
        const std::string stem = c.experiment == "isi-demo" ? "isi_demo" : "ici_demo";
        out.tables.emplace_back(stem + "_profiles", std::move(profiles));
        out.tables.emplace_back(stem + "_estimates", std::move(estimates));
        out.summary = {{"cp_limited_range_m", isi::cp_limited_range(c.frame)},
                       {"control_cp_limited_range_m", isi::cp_limited_range(control)},
                       {"targets", per_target},
                       {"control_max_estimator_disagreement_m", agreement}};
        return out;
    }

    inline ExperimentOutput run_experiment(const ExperimentConfig &c)
    {
        if (c.experiment == "tradeoff")
            return run_tradeoff(c);
        if (c.experiment == "se-sweep")
            return run_se_sweep(c);
        if (c.experiment == "beam-scan")
            return run_beam_scan(c);
        if (c.experiment == "mc-rmse")
            return run_mc_rmse(c);
        if (c.experiment == "isi-demo" || c.experiment == "ici-demo")
            return run_echo_demo(c);
        throw ConfigError({"unknown experiment '" + c.experiment + "'"});
    }

} // namespace thz::harness

#endif
