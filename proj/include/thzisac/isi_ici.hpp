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

#ifndef THZISAC_ISI_ICI_HPP
#define THZISAC_ISI_ICI_HPP

#include "channel.hpp"
#include "common.hpp"
#include "golden_section.hpp"
#include "sensing_rx.hpp"
#include "waveform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace thz::isi
{
    using waveform::FrameConfig;

    // Frequency grids (M x N) of the previous and the current slot. vec() is column-major.
    struct ExtendedTxPair
    {
        CMatrix prev;
        CMatrix curr;

        static ExtendedTxPair first_slot(const CMatrix &curr) { return {CMatrix::Zero(curr.rows(), curr.cols()), curr}; }

        void validate(const FrameConfig &cfg) const
        {
            if (prev.rows() != cfg.m_subcarriers || prev.cols() != cfg.n_symbols || curr.rows() != cfg.m_subcarriers ||
                curr.cols() != cfg.n_symbols)
                throw std::invalid_argument("ExtendedTxPair: both grids must be M x N");
        }
    };

    inline double cp_limited_range(const FrameConfig &cfg)
    {
        return kSpeedOfLight * cfg.cp_duration() / 2.0;
    }

    // Delay expressed on the sample grid T / M.
    struct DelayGeometry
    {
        double samples = 0.0; // d = tau M df
        int k_p = 0;          // whole symbols (incl. CP) contained in the delay
        double delta = 0.0;   // d - M_cp - k_p (M + M_cp), in [-M_cp, M)
        int l_p = 0;          // first useful sample that still belongs to symbol n - k_p
        cd b_tau{1.0, 0.0};   // e^{j2pi(k_p M_cp / M - tau df)}
        double b_phase = 0.0; // 2pi(k_p M_cp / M - tau df)
    };

    inline DelayGeometry delay_geometry(double tau, const FrameConfig &cfg)
    {
        if (tau < 0.0)
            throw std::domain_error("delay_geometry: negative delay");
        const int M = cfg.m_subcarriers, L = cfg.samples_per_symbol();
        DelayGeometry g;
        g.samples = tau * M * cfg.delta_f;
        g.k_p = int(std::floor(g.samples / L));
        g.delta = g.samples - cfg.m_cp - double(g.k_p) * L;
        g.l_p = std::clamp(int(std::ceil(g.delta)), 0, M);
        g.b_phase = 2.0 * kPi * (double(g.k_p) * cfg.m_cp / M - tau * cfg.delta_f);
        g.b_tau = cis(g.b_phase);
        return g;
    }

    // Continuous-time baseband of one slot,
    // s(t) = 1/sqrt(M) sum_{m,n} X[m, n] rect(t - n T_o) e^{j2pi m df (t - T_cp - n T_o)},
    // rect supported on [0, T_o). The 1/sqrt(M) factor makes samples coincide with ofdm_modulate.
    class TxBaseband
    {
    public:
        TxBaseband(CMatrix grid, FrameConfig cfg) : grid_(std::move(grid)), cfg_(cfg)
        {
            cfg_.validate();
            if (grid_.rows() != cfg_.m_subcarriers || grid_.cols() != cfg_.n_symbols)
                throw std::invalid_argument("TxBaseband: grid must be M x N");
        }

        cd operator()(double t) const
        {
            const double To = cfg_.total_symbol_duration();
            if (!(t >= 0.0) || t >= cfg_.n_symbols * To)
                return 0.0;
            int n = int(std::floor(t / To));
            n = std::min(n, cfg_.n_symbols - 1);
            const double local = t - cfg_.cp_duration() - n * To;
            cd acc = 0.0;
            for (int m = 0; m < cfg_.m_subcarriers; ++m)
                acc += grid_(m, n) * cis(2.0 * kPi * m * cfg_.delta_f * local);
            return acc / std::sqrt(double(cfg_.m_subcarriers));
        }

    private:
        CMatrix grid_;
        FrameConfig cfg_;
    };

    inline TxBaseband tx_baseband(const CMatrix &grid, const FrameConfig &cfg) { return TxBaseband(grid, cfg); }

    // H_bar(tau, nu) [x_prev; x_curr]: per-symbol IDFT with the delay ramp b^{m'}, two-branch
    // sample selection split at l_p, Doppler rotation over absolute sample times, DFT per symbol.
    // Returns the M x N frequency grid (vec of it is the length-MN vector).
    inline CMatrix apply_channel_operator(double tau, double nu, const ExtendedTxPair &x, const FrameConfig &cfg)
    {
        x.validate(cfg);
        const int M = cfg.m_subcarriers, N = cfg.n_symbols, Mcp = cfg.m_cp;
        const DelayGeometry g = delay_geometry(tau, cfg);

        CMatrix ramped(M, 2 * N);
        for (int m = 0; m < M; ++m)
        {
            const cd r = cis(g.b_phase * m);
            for (int n = 0; n < N; ++n)
            {
                ramped(m, n) = r * x.prev(m, n);
                ramped(m, N + n) = r * x.curr(m, n);
            }
        }
        const CMatrix z = dft::inverse_columns(ramped); // column n' + N holds symbol n' of the current slot

        CMatrix rx(M, N);
        const double To = cfg.total_symbol_duration(), Tcp = cfg.cp_duration(), Ts = cfg.sample_period();
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m)
            {
                const bool same = m >= g.l_p;
                const int col = n - g.k_p - (same ? 0 : 1) + N;
                const int row = same ? m : (m + Mcp) % M;
                const cd sample = col >= 0 ? z(row, col) : cd(0.0);
                rx(m, n) = sample * cis(2.0 * kPi * nu * (n * To + Tcp + m * Ts));
            }
        return dft::forward_columns(rx);
    }

    // Noisy frequency-domain echo sum_p alpha_p H_bar(tau_p, nu_p) x + w, w ~ CN(0, sigma2)
    struct EchoPath
    {
        double tau = 0.0, nu = 0.0;
        cd alpha{1.0, 0.0};
    };

    inline CMatrix isi_ici_rx(const std::vector<EchoPath> &paths, const ExtendedTxPair &x, const FrameConfig &cfg, double sigma2, RngStream &rng)
    {
        CMatrix y = CMatrix::Zero(cfg.m_subcarriers, cfg.n_symbols);
        for (const auto &p : paths)
        {
            if (!(p.tau <= cfg.slot_duration()) || !(std::abs(p.nu) < cfg.delta_f))
                throw std::domain_error("isi_ici_rx: need tau <= T_s and |nu| < delta_f");
            y += p.alpha * apply_channel_operator(p.tau, p.nu, x, cfg);
        }
        if (sigma2 > 0.0)
            y += channel::awgn(y.rows(), y.cols(), sigma2, rng);
        return y;
    }

    // Interference-free approximation X_curr .* Psi(tau, nu)
    inline CMatrix hadamard_model(double tau, double nu, const CMatrix &x_curr, const FrameConfig &cfg)
    {
        CMatrix out(x_curr.rows(), x_curr.cols());
        const double To = cfg.total_symbol_duration();
        for (Eigen::Index n = 0; n < x_curr.cols(); ++n)
            for (Eigen::Index m = 0; m < x_curr.rows(); ++m)
                out(m, n) = x_curr(m, n) * cis(-2.0 * kPi * double(m) * cfg.delta_f * tau) * cis(2.0 * kPi * double(n) * To * nu);
        return out;
    }

    // ---------------------------------------------------------------------
    // Estimators
    // ---------------------------------------------------------------------

    struct Detection
    {
        sensing::DelayDopplerEstimate estimate;
        cd alpha{0.0, 0.0};
    };

    struct TackledOptions
    {
        int targets = 1;
        AlternatingSearch search{};
        double min_objective = 1e-20; // below this the residual counts as empty
    };

    // |<H_bar x, y>|^2 / ||H_bar x||^2 for one candidate
    inline double tackled_objective(const CMatrix &y, const ExtendedTxPair &x, double tau, double nu, const FrameConfig &cfg, cd *alpha = nullptr)
    {
        const CMatrix hx = apply_channel_operator(tau, nu, x, cfg);
        const double energy = hx.squaredNorm();
        if (!(energy > 0.0))
            return 0.0;
        const cd corr = (hx.array().conjugate() * y.array()).sum();
        if (alpha)
            *alpha = corr / energy;
        return std::norm(corr) / energy;
    }

    // Coarse search of the tackled objective: delay step T / (2M) over [0, T_s], Doppler step
    // 1 / (2 N T_o) over (-df, df). Correlations are computed on the time axis with FFTs, one
    // pass per Doppler node and per half-sample offset.
    struct TackledCoarse
    {
        RMatrix objective;      // delay node x Doppler node
        double delay_step = 0.0;   // [s]
        double doppler_step = 0.0; // [Hz]
        int doppler_offset = 0;    // Doppler node j holds nu = (j - doppler_offset) * doppler_step
        int best_delay = 0, best_doppler = 0;

        double tau(int i) const { return i * delay_step; }
        double nu(int j) const { return (j - doppler_offset) * doppler_step; }
    };

    namespace detail
    {
        // Transmit stream of both slots (prev then curr) sampled at k - offset for k in [0, 2S),
        // offset in {0, 0.5} samples, including CPs.
        inline CVector tx_stream(const ExtendedTxPair &x, const FrameConfig &cfg, bool half)
        {
            const int M = cfg.m_subcarriers, N = cfg.n_symbols, L = cfg.samples_per_symbol(), Mcp = cfg.m_cp;
            CMatrix grids(M, 2 * N);
            grids << x.prev, x.curr;
            if (half)
                for (int m = 0; m < M; ++m)
                    grids.row(m) *= cis(-kPi * m / double(M));
            const CMatrix body = dft::inverse_columns(grids);
            const Eigen::Index S2 = Eigen::Index(2) * N * L;
            CVector s = CVector::Zero(S2);
            for (Eigen::Index k = 0; k < S2; ++k)
            {
                if (!half)
                {
                    const auto sym = k / L, p = k % L;
                    s(k) = body((p - Mcp + M) % M, sym);
                }
                else
                {
                    if (k == 0)
                        continue; // position -0.5 precedes the stream
                    const auto sym = (k - 1) / L;
                    const auto p_int = (k - 1) % L + 1; // ceil of the half-integer position, in [1, L]
                    s(k) = body((p_int - Mcp + M) % M, sym);
                }
            }
            return s;
        }

        inline CVector fft(const CVector &v)
        {
            CVector out(v.size());
            dft::engine().fwd(out.data(), v.data(), v.size());
            return out;
        }
        inline CVector ifft(const CVector &v) // includes 1/n
        {
            CVector out(v.size());
            dft::engine().inv(out.data(), v.data(), v.size());
            return out;
        }
        inline Eigen::Index next_pow2(Eigen::Index n)
        {
            Eigen::Index p = 1;
            while (p < n)
                p <<= 1;
            return p;
        }
    } // namespace detail

    inline TackledCoarse tackled_coarse(const CMatrix &y, const ExtendedTxPair &x, const FrameConfig &cfg)
    {
        x.validate(cfg);
        const int M = cfg.m_subcarriers, N = cfg.n_symbols, L = cfg.samples_per_symbol(), Mcp = cfg.m_cp;
        const Eigen::Index S = Eigen::Index(N) * L;
        const Eigen::Index nfft = detail::next_pow2(2 * S);

        TackledCoarse c;
        c.delay_step = cfg.sample_period() / 2.0;
        c.doppler_step = 1.0 / (2.0 * N * cfg.total_symbol_duration());
        const int J = int(std::ceil(cfg.delta_f / c.doppler_step)) - 1;
        c.doppler_offset = J;
        const int delay_nodes = int(2 * S + 1);
        c.objective = RMatrix::Zero(delay_nodes, 2 * J + 1);

        // received useful samples on the slot timeline; CP positions stay zero
        const CMatrix r_useful = dft::inverse_columns(y);
        CVector mask = CVector::Zero(nfft);
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m)
                mask(Eigen::Index(n) * L + Mcp + m) = 1.0;

        // offset 0 handles integer delays d0, offset 0.5 handles d0 + 0.5
        std::vector<CVector> stream_spec(2);
        std::vector<RVector> energy(2);
        const CVector mask_spec = detail::fft(mask);
        for (int h = 0; h < 2; ++h)
        {
            CVector s = CVector::Zero(nfft);
            s.head(2 * S) = detail::tx_stream(x, cfg, h == 1);
            stream_spec[std::size_t(h)] = detail::fft(s);
            CVector pw = CVector::Zero(nfft);
            pw.head(2 * S) = s.head(2 * S).cwiseAbs2().cast<cd>();
            // sum_j mask[j] |s[j + e]|^2
            const CVector e = detail::ifft(CVector(detail::fft(pw).array() * mask_spec.array().conjugate()));
            energy[std::size_t(h)] = e.real();
        }

        CVector yt = CVector::Zero(nfft);
        for (int j = 0; j <= 2 * J; ++j)
        {
            const double nu = c.nu(j);
            yt.setZero();
            for (int n = 0; n < N; ++n)
                for (int m = 0; m < M; ++m)
                {
                    const Eigen::Index pos = Eigen::Index(n) * L + Mcp + m;
                    yt(pos) = r_useful(m, n) * cis(-2.0 * kPi * nu * double(pos) * cfg.sample_period());
                }
            const CVector ys = detail::fft(yt);
            for (int h = 0; h < 2; ++h)
            {
                // corr[e] = sum_j yt[j] conj(s[j + e]) = conj(IFFT(S conj(Y))[e])
                const CVector corr = detail::ifft(CVector(stream_spec[std::size_t(h)].array() * ys.array().conjugate()));
                for (Eigen::Index d0 = 0; d0 <= S; ++d0)
                {
                    const Eigen::Index node = 2 * d0 + h;
                    if (node >= delay_nodes)
                        continue;
                    const Eigen::Index e = S - d0;
                    const double en = energy[std::size_t(h)](e);
                    if (en > 1e-12)
                        c.objective(node, j) = std::norm(corr(e)) / en;
                }
            }
        }
        Eigen::Index bi = 0, bj = 0;
        c.objective.maxCoeff(&bi, &bj);
        c.best_delay = int(bi);
        c.best_doppler = int(bj);
        return c;
    }

    inline sensing::DelayDopplerEstimate refine_tackled(const CMatrix &y, const ExtendedTxPair &x, const FrameConfig &cfg, const TackledCoarse &c,
                                                        const AlternatingSearch &search)
    {
        const double d0 = c.best_delay, j0 = c.best_doppler - c.doppler_offset;
        const double d_max = (c.objective.rows() - 1);
        const double j_lim = (cfg.delta_f / c.doppler_step) * (1.0 - 1e-9);
        auto f = [&](double d, double j)
        { return tackled_objective(y, x, d * c.delay_step, j * c.doppler_step, cfg); };
        const auto best = alternating_golden_section(f, d0, j0, std::max(0.0, d0 - 1.0), std::min(d_max, d0 + 1.0),
                                                     std::max(-j_lim, j0 - 1.0), std::min(j_lim, j0 + 1.0), search);
        sensing::DelayDopplerEstimate e;
        e.coarse_m = c.best_delay;
        e.coarse_n = int(j0);
        e.tau_hat = best.x * c.delay_step;
        e.nu_hat = best.y * c.doppler_step;
        e.range_hat = channel::range_of_delay(e.tau_hat);
        e.velocity_hat = channel::velocity_of_doppler(e.nu_hat, cfg.fc);
        e.profile_value = best.value;
        e.on_boundary = best.on_boundary;
        e.kept_coarse = best.kept_start;
        return e;
    }

    // Successive estimate-and-cancel with the exact operator; least-squares gain per pass
    inline std::vector<Detection> tackled_estimate(const CMatrix &y, const ExtendedTxPair &x, const FrameConfig &cfg, const TackledOptions &opt = {},
                                                   std::vector<TackledCoarse> *coarse_out = nullptr)
    {
        if (opt.targets < 1)
            throw std::invalid_argument("tackled_estimate: target count must be >= 1");
        CMatrix residual = y;
        std::vector<Detection> out;
        for (int p = 0; p < opt.targets; ++p)
        {
            const TackledCoarse c = tackled_coarse(residual, x, cfg);
            if (!(c.objective(c.best_delay, c.best_doppler) > opt.min_objective))
            {
                if (p == 0)
                    throw std::runtime_error("tackled_estimate: no detectable target");
                break;
            }
            Detection d;
            d.estimate = refine_tackled(residual, x, cfg, c, opt.search);
            tackled_objective(residual, x, d.estimate.tau_hat, d.estimate.nu_hat, cfg, &d.alpha);
            residual -= d.alpha * apply_channel_operator(d.estimate.tau_hat, d.estimate.nu_hat, x, cfg);
            out.push_back(d);
            if (coarse_out)
                coarse_out->push_back(c);
        }
        return out;
    }

    // Same cancel loop on the interference-free Hadamard model, single receive chain
    inline std::vector<Detection> unaware_estimate(const CMatrix &y, const CMatrix &x_curr, const FrameConfig &cfg, const TackledOptions &opt = {})
    {
        if (opt.targets < 1)
            throw std::invalid_argument("unaware_estimate: target count must be >= 1");
        const double x_energy = x_curr.squaredNorm();
        if (!(x_energy > 0.0))
            throw std::invalid_argument("unaware_estimate: zero transmit grid");
        CMatrix residual = y;
        std::vector<Detection> out;
        for (int p = 0; p < opt.targets; ++p)
        {
            const CMatrix z = (x_curr.array().conjugate() * residual.array()).matrix();
            const auto coarse = sensing::sdft_coarse(z);
            if (!(coarse.profile(coarse.m0, (coarse.n0 + cfg.n_symbols) % cfg.n_symbols) / x_energy > opt.min_objective))
            {
                if (p == 0)
                    throw std::runtime_error("unaware_estimate: no detectable target");
                break;
            }
            Detection d;
            d.estimate = sensing::gss_refine(z, coarse, cfg, opt.search);
            d.estimate.profile_value /= x_energy;
            const CMatrix model = hadamard_model(d.estimate.tau_hat, d.estimate.nu_hat, x_curr, cfg);
            d.alpha = (model.array().conjugate() * residual.array()).sum() / x_energy;
            residual -= d.alpha * model;
            out.push_back(d);
        }
        return out;
    }

} // namespace thz::isi

#endif
