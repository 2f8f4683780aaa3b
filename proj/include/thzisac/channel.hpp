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

#ifndef THZISAC_CHANNEL_HPP
#define THZISAC_CHANNEL_HPP

#include "common.hpp"
#include "geometry.hpp"
#include "waveform.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace thz::channel
{
    using geometry::UpaGeometry;
    using waveform::FrameConfig;

    // Round-trip delay [s] of a reflector at range r [m]
    inline double delay_of_range(double r)
    {
        if (r < 0.0)
            throw std::domain_error("delay_of_range: negative range");
        return 2.0 * r / kSpeedOfLight;
    }
    inline double range_of_delay(double tau) { return tau * kSpeedOfLight / 2.0; }

    // Two-way Doppler shift [Hz] of a reflector with radial velocity v [m/s]
    inline double doppler_of_velocity(double v, double fc) { return 2.0 * fc * v / kSpeedOfLight; }
    inline double velocity_of_doppler(double nu, double fc) { return nu * kSpeedOfLight / (2.0 * fc); }

    // ---------------------------------------------------------------------
    // Communication channel
    // ---------------------------------------------------------------------

    struct CommPath
    {
        CVector gain_per_subcarrier; // alpha[m], length M
        double aoa_theta = 0.0, aoa_phi = kPi / 2;
        double aod_theta = 0.0, aod_phi = kPi / 2;
        bool is_los = false;
    };

    // H_c[m] = gamma * sum_path alpha[m] a_r(aoa) a_t^H(aod), gamma = sqrt(Nt Nr / (L_N + 1))
    class CommChannel
    {
    public:
        CommChannel() = default;
        CommChannel(std::vector<CommPath> paths, UpaGeometry tx, UpaGeometry rx)
            : paths_(std::move(paths)), tx_(tx), rx_(rx)
        {
            validate();
            const auto P = Eigen::Index(paths_.size());
            a_t_.resize(tx_.size(), P);
            a_r_.resize(rx_.size(), P);
            for (Eigen::Index p = 0; p < P; ++p)
            {
                const auto &path = paths_[std::size_t(p)];
                a_t_.col(p) = geometry::steering_upa(path.aod_theta, path.aod_phi, tx_);
                a_r_.col(p) = geometry::steering_upa(path.aoa_theta, path.aoa_phi, rx_);
            }
        }

        const std::vector<CommPath> &paths() const { return paths_; }
        const UpaGeometry &tx() const { return tx_; }
        const UpaGeometry &rx() const { return rx_; }
        int nt() const { return tx_.size(); }
        int nr() const { return rx_.size(); }
        int subcarriers() const { return paths_.empty() ? 0 : int(paths_.front().gain_per_subcarrier.size()); }
        int nlos_count() const { return int(paths_.size()) - 1; }
        double gamma() const { return std::sqrt(double(nt()) * nr() / double(paths_.size())); }

        // Steering matrices with one column per path
        const CMatrix &tx_steering() const { return a_t_; }
        const CMatrix &rx_steering() const { return a_r_; }

        CVector gains(int m) const
        {
            check_subcarrier(m);
            CVector g(Eigen::Index(paths_.size()));
            for (std::size_t p = 0; p < paths_.size(); ++p)
                g(Eigen::Index(p)) = paths_[p].gain_per_subcarrier(m);
            return g;
        }

        // Dense N_r x N_t matrix
        CMatrix matrix(int m) const
        {
            return gamma() * a_r_ * gains(m).asDiagonal() * a_t_.adjoint();
        }

        // H_c[m] * F without forming H_c[m]
        CMatrix apply(int m, const CMatrix &F) const
        {
            return gamma() * (a_r_ * (gains(m).asDiagonal() * (a_t_.adjoint() * F)));
        }

        // H_c[m]^H * C without forming H_c[m]
        CMatrix apply_adjoint(int m, const CMatrix &C) const
        {
            return gamma() * (a_t_ * (gains(m).conjugate().asDiagonal() * (a_r_.adjoint() * C)));
        }

    private:
        void validate() const
        {
            tx_.validate();
            rx_.validate();
            if (paths_.empty())
                throw std::invalid_argument("CommChannel: at least one path required");
            int los = 0;
            const auto M = paths_.front().gain_per_subcarrier.size();
            for (const auto &p : paths_)
            {
                los += p.is_los ? 1 : 0;
                if (p.gain_per_subcarrier.size() != M || M == 0)
                    throw std::invalid_argument("CommChannel: every path needs a gain for each subcarrier");
            }
            if (los != 1)
                throw std::invalid_argument("CommChannel: exactly one LoS path required");
        }
        void check_subcarrier(int m) const
        {
            if (m < 0 || m >= subcarriers())
                throw std::out_of_range("CommChannel: subcarrier " + std::to_string(m) + " out of range");
        }

        std::vector<CommPath> paths_;
        UpaGeometry tx_, rx_;
        CMatrix a_t_, a_r_;
    };

    inline CMatrix comm_channel(const CommChannel &ch, int m) { return ch.matrix(m); }

    // Random ray-based channel. LoS has unit gain with a pure delay phase; NLoS paths are
    // nlos_loss_db weaker with random phase and delays uniform in [0, T_cp / 2].
    struct CommChannelSpec
    {
        int nlos_paths = 4;
        double nlos_loss_db = 15.0;
        double aod_min_deg = -60.0, aod_max_deg = 60.0;
        double aoa_min_deg = -60.0, aoa_max_deg = 60.0;
        double los_delay_s = 0.0;
    };

    inline CommChannel random_comm_channel(const CommChannelSpec &spec, const FrameConfig &frame,
                                           const UpaGeometry &tx, const UpaGeometry &rx, RngStream &rng)
    {
        frame.validate();
        if (spec.nlos_paths < 0)
            throw std::invalid_argument("CommChannelSpec: negative NLoS path count");
        const int M = frame.m_subcarriers;
        auto make_path = [&](bool los, double delay, cd gain)
        {
            CommPath p;
            p.is_los = los;
            p.aod_theta = deg2rad(rng.uniform(spec.aod_min_deg, spec.aod_max_deg));
            p.aoa_theta = deg2rad(rng.uniform(spec.aoa_min_deg, spec.aoa_max_deg));
            p.gain_per_subcarrier.resize(M);
            for (int m = 0; m < M; ++m)
                p.gain_per_subcarrier(m) = gain * cis(-2.0 * kPi * m * frame.delta_f * delay);
            return p;
        };
        std::vector<CommPath> paths;
        paths.push_back(make_path(true, spec.los_delay_s, 1.0));
        const double mag = std::pow(10.0, -spec.nlos_loss_db / 20.0);
        for (int l = 0; l < spec.nlos_paths; ++l)
        {
            const double excess = rng.uniform(0.0, frame.cp_duration() / 2.0);
            const cd g = mag * cis(rng.phase());
            paths.push_back(make_path(false, spec.los_delay_s + excess, g));
        }
        return CommChannel(std::move(paths), tx, rx);
    }

    // ---------------------------------------------------------------------
    // Sensing channel
    // ---------------------------------------------------------------------

    struct SensingTarget
    {
        double range_m = 10.0;
        double velocity_mps = 0.0;
        double azimuth = 0.0;       // [rad]
        double elevation = kPi / 2; // [rad]
        cd coeff{1.0, 0.0};         // h_p

        double delay() const { return delay_of_range(range_m); }
        double doppler(double fc) const { return doppler_of_velocity(velocity_mps, fc); }
    };

    struct SensingScene
    {
        std::vector<SensingTarget> targets;
        double noise_power = 1.0; // sigma^2
    };

    // Whether the scene satisfies the CP-bounded delay and small-Doppler assumptions of the
    // frequency-domain sensing model. Doppler counts as small below 5% of delta_f.
    struct ModelCheck
    {
        bool delay_within_cp = true;
        bool doppler_negligible = true;
        bool ok() const { return delay_within_cp && doppler_negligible; }
    };

    inline ModelCheck check_isi_ici_free(const SensingScene &scene, const FrameConfig &frame, double doppler_fraction = 0.05)
    {
        ModelCheck c;
        for (const auto &t : scene.targets)
        {
            if (t.delay() > frame.cp_duration())
                c.delay_within_cp = false;
            if (std::abs(t.doppler(frame.fc)) > doppler_fraction * frame.delta_f)
                c.doppler_negligible = false;
        }
        return c;
    }

    // Per-target scalar h_p^{(q)}[m, n] including the sqrt(Nt Nr / P) factor
    inline cd sensing_path_gain(const SensingTarget &t, std::size_t target_count, int m, int n, int q,
                                const FrameConfig &frame, int nt, int nr)
    {
        const double scale = std::sqrt(double(nt) * nr / double(target_count));
        const double tau = t.delay(), nu = t.doppler(frame.fc);
        const double t_sym = (q - 1) * frame.slot_duration() + n * frame.total_symbol_duration();
        return scale * t.coeff * cis(-2.0 * kPi * m * frame.delta_f * tau) * cis(2.0 * kPi * t_sym * nu);
    }

    // H_s[m, n] = sqrt(Nt Nr / P) sum_p h_p e^{-j2pi m df tau_p} e^{j2pi((q-1)T_s + n T_o) nu_p} a_r a_t^T
    // (transpose on a_t, not conjugate transpose)
    inline CMatrix sensing_channel(const SensingScene &scene, int m, int n, int q, const FrameConfig &frame,
                                   const UpaGeometry &tx, const UpaGeometry &rx)
    {
        CMatrix H = CMatrix::Zero(rx.size(), tx.size());
        for (const auto &t : scene.targets)
        {
            const cd g = sensing_path_gain(t, scene.targets.size(), m, n, q, frame, tx.size(), rx.size());
            const CVector ar = geometry::steering_upa(t.azimuth, t.elevation, rx);
            const CVector at = geometry::steering_upa(t.azimuth, t.elevation, tx);
            H.noalias() += g * ar * at.transpose();
        }
        return H;
    }

    // Circularly-symmetric complex Gaussian noise, per-entry variance sigma2
    inline CMatrix awgn(Eigen::Index rows, Eigen::Index cols, double sigma2, RngStream &rng)
    {
        if (sigma2 < 0.0)
            throw std::invalid_argument("awgn: negative noise power");
        CMatrix e(rows, cols);
        if (sigma2 == 0.0)
        {
            e.setZero();
            return e;
        }
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r)
                e(r, c) = rng.complex_normal(sigma2);
        return e;
    }

} // namespace thz::channel

#endif
