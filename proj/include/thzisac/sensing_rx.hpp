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

#ifndef THZISAC_SENSING_RX_HPP
#define THZISAC_SENSING_RX_HPP

#include "channel.hpp"
#include "common.hpp"
#include "geometry.hpp"
#include "golden_section.hpp"
#include "precoding.hpp"
#include "waveform.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace thz::sensing
{
    using channel::SensingScene;
    using geometry::AngularWindow;
    using geometry::UpaGeometry;
    using waveform::FrameConfig;

    struct ReceiveCombiner
    {
        CMatrix matrix; // N_r x N_RF^r
        std::vector<double> direction_angles;
        double elevation = kPi / 2;

        int chains() const { return int(matrix.cols()); }
    };

    // N_RF^r beams toward angles drawn uniformly inside `window` (pass the mirrored window -Omega_q
    // to look where slot q's transmit beam lands). With a receive switch pattern, column j keeps only
    // the subarrays connected to chain j and is renormalized to unit norm.
    inline ReceiveCombiner receive_combiner(const AngularWindow &window, int n_rf_r, const UpaGeometry &geom, RngStream &rng,
                                            const precoding::SwitchMatrix *switches = nullptr, double elevation = kPi / 2)
    {
        if (n_rf_r < 1)
            throw std::invalid_argument("receive_combiner: need at least one RF chain");
        if (window.hi < window.lo)
            throw std::invalid_argument("receive_combiner: empty window");
        if (switches && (switches->n_rf() != n_rf_r || switches->antennas() != geom.size()))
            throw std::invalid_argument("receive_combiner: switch pattern does not match the receive array");
        ReceiveCombiner c;
        c.elevation = elevation;
        c.matrix.resize(geom.size(), n_rf_r);
        for (int j = 0; j < n_rf_r; ++j)
        {
            const double theta = window.hi > window.lo ? rng.uniform(window.lo, window.hi) : window.lo;
            c.direction_angles.push_back(theta);
            CVector col = geometry::steering_upa(theta, elevation, geom);
            if (switches)
            {
                const int K = switches->k_t;
                for (int i = 0; i < switches->n_rf(); ++i)
                    if (!switches->closed(i, j))
                        col.segment(i * K, K).setZero();
                col /= col.norm();
            }
            c.matrix.col(j) = col;
        }
        return c;
    }

    // Y_theta,q: N_RF^r x (M N), column m + n M (symbol-major blocks of M subcarriers)
    struct ObservationBlock
    {
        CMatrix y;
        int m_subcarriers = 0;
        int n_symbols = 0;

        Eigen::Index column(int m, int n) const { return Eigen::Index(m) + Eigen::Index(n) * m_subcarriers; }
        int chains() const { return int(y.rows()); }

        // Y_u as an M x N grid
        CMatrix chain_grid(int u) const
        {
            CMatrix g(m_subcarriers, n_symbols);
            for (int n = 0; n < n_symbols; ++n)
                for (int m = 0; m < m_subcarriers; ++m)
                    g(m, n) = y(u, column(m, n));
            return g;
        }
    };

    // Noise-free sensing echo W^H a_r a_t^T F[m] s[m, n] for a unit-gain path at (theta, phi), no delay or Doppler
    inline CMatrix steered_reference(double theta, double phi, const precoding::HybridPrecoder &prec, const waveform::SymbolFrame &sym,
                                     const ReceiveCombiner &comb, const UpaGeometry &tx, const UpaGeometry &rx)
    {
        const CVector w = comb.matrix.adjoint() * geometry::steering_upa(theta, phi, rx);
        const CVector at = geometry::steering_upa(theta, phi, tx);
        const Eigen::RowVectorXcd rf = at.transpose() * prec.analog.matrix;
        CMatrix x(comb.chains(), sym.symbols.cols());
        for (int m = 0; m < sym.m_subcarriers; ++m)
        {
            const Eigen::RowVectorXcd t = rf * prec.digital.per_subcarrier[std::size_t(m)];
            for (int n = 0; n < sym.n_symbols; ++n)
            {
                const cd s = (t * sym.at(m, n)).value();
                x.col(sym.column(m, n)) = s * w;
            }
        }
        return x;
    }

    // y_q[m, n] = W^H H_s[m, n] F_RF F_BB[m] s[m, n] + W^H e with e ~ CN(0, sigma2 I)
    inline ObservationBlock simulate_rx(const SensingScene &scene, const precoding::HybridPrecoder &prec, const waveform::SymbolFrame &sym,
                                        const ReceiveCombiner &comb, const FrameConfig &frame, int q, const UpaGeometry &tx,
                                        const UpaGeometry &rx, double sigma2, RngStream &rng)
    {
        if (sym.m_subcarriers != frame.m_subcarriers || sym.n_symbols != frame.n_symbols)
            throw std::invalid_argument("simulate_rx: symbol frame does not match frame config");
        if (comb.matrix.rows() != rx.size() || prec.analog.matrix.rows() != tx.size())
            throw std::invalid_argument("simulate_rx: array sizes do not match precoder or combiner");
        ObservationBlock out{CMatrix::Zero(comb.chains(), sym.symbols.cols()), frame.m_subcarriers, frame.n_symbols};
        const std::size_t P = scene.targets.size();
        for (const auto &t : scene.targets)
        {
            const CMatrix ref = steered_reference(t.azimuth, t.elevation, prec, sym, comb, tx, rx);
            for (int n = 0; n < frame.n_symbols; ++n)
                for (int m = 0; m < frame.m_subcarriers; ++m)
                {
                    const cd g = channel::sensing_path_gain(t, P, m, n, q, frame, tx.size(), rx.size());
                    out.y.col(out.column(m, n)) += g * ref.col(out.column(m, n));
                }
        }
        if (sigma2 > 0.0)
        {
            // W^H e has covariance sigma2 W^H W; colour white noise with its Cholesky factor
            const CMatrix gram = comb.matrix.adjoint() * comb.matrix;
            Eigen::LLT<CMatrix> llt(gram);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("simulate_rx: combiner columns are linearly dependent");
            const CMatrix white = channel::awgn(comb.chains(), out.y.cols(), sigma2, rng);
            out.y += llt.matrixL() * white;
        }
        return out;
    }

    // ---------------------------------------------------------------------
    // Angle estimation
    // ---------------------------------------------------------------------

    struct MusicResult
    {
        std::vector<double> grid;       // azimuth [rad]
        RVector spectrum;               // pseudo spectrum on grid
        std::vector<double> peaks;      // interpolated azimuth estimates [rad], strongest first
        double elevation = kPi / 2;
        RVector eigenvalues;            // descending
        int signal_dim = 0, noise_dim = 0;
    };

    // R = Y Y^H / (M N)
    inline CMatrix sample_covariance(const ObservationBlock &block)
    {
        return block.y * block.y.adjoint() / double(block.y.cols());
    }

    // Number of sources from the largest ratio between consecutive eigenvalues
    inline int eigen_gap_order(const RVector &descending)
    {
        int best = 1;
        double ratio = 0.0;
        for (Eigen::Index k = 0; k + 1 < descending.size(); ++k)
        {
            const double r = descending(k) / std::max(descending(k + 1), 1e-300);
            if (r > ratio)
            {
                ratio = r;
                best = int(k + 1);
            }
        }
        return std::min<int>(best, int(descending.size()) - 1);
    }

    struct MusicOptions
    {
        double step = deg2rad(0.01);
    };

    inline MusicResult music_spectrum(const ObservationBlock &block, const ReceiveCombiner &comb, int p_q, const AngularWindow &search,
                                      const UpaGeometry &rx, const MusicOptions &opt = {})
    {
        const int nrf = comb.chains();
        if (p_q < 1 || p_q >= nrf)
            throw std::invalid_argument("music_spectrum: source count must lie in [1, N_RF^r - 1] so the noise subspace is nonempty");
        if (!(opt.step > 0.0))
            throw std::invalid_argument("music_spectrum: grid step must be positive");

        Eigen::SelfAdjointEigenSolver<CMatrix> evd(sample_covariance(block));
        const CMatrix &vecs = evd.eigenvectors(); // ascending eigenvalues
        MusicResult r;
        r.elevation = comb.elevation;
        r.signal_dim = p_q;
        r.noise_dim = nrf - p_q;
        r.eigenvalues = evd.eigenvalues().reverse();
        const CMatrix Un = vecs.leftCols(nrf - p_q);

        const int count = std::max(2, int(std::floor((search.hi - search.lo) / opt.step)) + 1);
        r.grid.resize(std::size_t(count));
        for (int i = 0; i < count; ++i)
            r.grid[std::size_t(i)] = std::min(search.lo + i * opt.step, search.hi);
        const CMatrix A = geometry::steering_matrix(r.grid, comb.elevation, rx);
        const CMatrix B = comb.matrix.adjoint() * A; // W^H a per grid column
        const CMatrix C = Un.adjoint() * B;
        r.spectrum.resize(count);
        RVector denom(count);
        for (int i = 0; i < count; ++i)
        {
            denom(i) = C.col(i).squaredNorm();
            r.spectrum(i) = B.col(i).squaredNorm() / std::max(denom(i), 1e-300);
        }

        // local maxima, strongest first, refined by a parabola through 1/P
        std::vector<int> idx;
        for (int i = 0; i < count; ++i)
        {
            const bool left = i == 0 || r.spectrum(i) >= r.spectrum(i - 1);
            const bool right = i == count - 1 || r.spectrum(i) > r.spectrum(i + 1);
            if (left && right)
                idx.push_back(i);
        }
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b)
                         { return r.spectrum(a) > r.spectrum(b); });
        for (int k = 0; k < std::min<int>(p_q, int(idx.size())); ++k)
        {
            const int i = idx[std::size_t(k)];
            double theta = r.grid[std::size_t(i)];
            if (i > 0 && i < count - 1)
            {
                const double y0 = 1.0 / r.spectrum(i - 1), y1 = 1.0 / r.spectrum(i), y2 = 1.0 / r.spectrum(i + 1);
                const double curv = y0 - 2.0 * y1 + y2;
                if (curv > 0.0)
                {
                    const double shift = 0.5 * (y0 - y2) / curv;
                    theta += std::clamp(shift, -1.0, 1.0) * (r.grid[std::size_t(i + 1)] - r.grid[std::size_t(i)]);
                }
            }
            r.peaks.push_back(theta);
        }
        return r;
    }

    // ---------------------------------------------------------------------
    // Range / velocity estimation
    // ---------------------------------------------------------------------

    // Per-chain references X_hat_u (rows of the returned N_RF^r x MN block) for an estimated angle
    inline ObservationBlock reconstruct_reference(double theta, double phi, const precoding::HybridPrecoder &prec, const waveform::SymbolFrame &sym,
                                                  const ReceiveCombiner &comb, const UpaGeometry &tx, const UpaGeometry &rx)
    {
        return {steered_reference(theta, phi, prec, sym, comb, tx, rx), sym.m_subcarriers, sym.n_symbols};
    }

    // Correlation grid Z[m, n] = sum_u conj(X_hat_u[m, n]) Y_u[m, n]
    inline CMatrix correlation_grid(const ObservationBlock &y, const ObservationBlock &x_hat)
    {
        if (y.y.rows() != x_hat.y.rows() || y.y.cols() != x_hat.y.cols())
            throw std::invalid_argument("correlation_grid: observation and reference shapes differ");
        CMatrix z(y.m_subcarriers, y.n_symbols);
        for (int n = 0; n < y.n_symbols; ++n)
            for (int m = 0; m < y.m_subcarriers; ++m)
            {
                const auto c = y.column(m, n);
                z(m, n) = x_hat.y.col(c).dot(y.y.col(c));
            }
        return z;
    }

    // |sum_{m,n} Z[m, n] e^{j2pi m df tau} e^{-j2pi n T_o nu}|^2
    inline double ml_profile(const CMatrix &z, double tau, double nu, const FrameConfig &frame)
    {
        const cd step_m = cis(2.0 * kPi * frame.delta_f * tau);
        const cd step_n = cis(-2.0 * kPi * frame.total_symbol_duration() * nu);
        cd acc = 0.0;
        cd pn = 1.0;
        for (Eigen::Index n = 0; n < z.cols(); ++n)
        {
            cd col = 0.0, pm = 1.0;
            for (Eigen::Index m = 0; m < z.rows(); ++m)
            {
                col += z(m, n) * pm;
                pm *= step_m;
            }
            acc += col * pn;
            pn *= step_n;
        }
        return std::norm(acc);
    }

    // |sum_u Tr((Psi(tau, nu) .* X_hat_u)^H Y_u)|^2 evaluated term by term
    inline double ml_profile(const ObservationBlock &y, const ObservationBlock &x_hat, double tau, double nu, const FrameConfig &frame)
    {
        cd acc = 0.0;
        for (int u = 0; u < y.chains(); ++u)
            for (int n = 0; n < y.n_symbols; ++n)
                for (int m = 0; m < y.m_subcarriers; ++m)
                {
                    const cd psi = cis(-2.0 * kPi * m * frame.delta_f * tau) * cis(2.0 * kPi * n * frame.total_symbol_duration() * nu);
                    const auto c = y.column(m, n);
                    acc += std::conj(psi * x_hat.y(u, c)) * y.y(u, c);
                }
        return std::norm(acc);
    }

    struct CoarseGrid
    {
        RMatrix profile; // M x N, column index [n0]_N
        int m0 = 0;      // delay bin
        int n0 = 0;      // Doppler bin in [-N/2, N/2)
    };

    // Profile on tau = m0 / (M df), nu = n0 / (N T_o) from g_d = F_M^H Z F_N with unitary DFTs.
    // The profile is M N |g_d|^2, which equals ml_profile on every node.
    inline CoarseGrid sdft_coarse(const CMatrix &z)
    {
        const auto M = z.rows(), N = z.cols();
        const CMatrix g = dft::inverse_columns(z);                       // F_M^H along delay
        const CMatrix gt = dft::forward_columns(CMatrix(g.transpose())); // F_N along symbols
        CoarseGrid r;
        r.profile.resize(M, N);
        for (Eigen::Index n = 0; n < N; ++n)
            for (Eigen::Index m = 0; m < M; ++m)
                r.profile(m, n) = double(M) * double(N) * std::norm(gt(n, m));
        Eigen::Index im = 0, in = 0;
        r.profile.maxCoeff(&im, &in);
        r.m0 = int(im);
        r.n0 = in < N - N / 2 ? int(in) : int(in - N);
        return r;
    }

    struct DelayDopplerEstimate
    {
        double tau_hat = 0.0, nu_hat = 0.0;
        double range_hat = 0.0, velocity_hat = 0.0;
        int coarse_m = 0, coarse_n = 0;
        double profile_value = 0.0;
        bool on_boundary = false;
        bool kept_coarse = false;
    };

    // Alternating golden-section refinement inside +-1 bin around the coarse node
    inline DelayDopplerEstimate gss_refine(const CMatrix &z, const CoarseGrid &coarse, const FrameConfig &frame, const AlternatingSearch &opt = {})
    {
        const double tau_bin = 1.0 / (frame.m_subcarriers * frame.delta_f);
        const double nu_bin = 1.0 / (frame.n_symbols * frame.total_symbol_duration());
        auto f = [&](double mb, double nb)
        { return ml_profile(z, mb * tau_bin, nb * nu_bin, frame); };
        const double m0 = coarse.m0, n0 = coarse.n0;
        const auto best = alternating_golden_section(f, m0, n0, m0 - 1.0, m0 + 1.0, n0 - 1.0, n0 + 1.0, opt);
        DelayDopplerEstimate e;
        e.coarse_m = coarse.m0;
        e.coarse_n = coarse.n0;
        e.tau_hat = best.x * tau_bin;
        e.nu_hat = best.y * nu_bin;
        e.range_hat = channel::range_of_delay(e.tau_hat);
        e.velocity_hat = channel::velocity_of_doppler(e.nu_hat, frame.fc);
        e.profile_value = best.value;
        e.on_boundary = best.on_boundary;
        e.kept_coarse = best.kept_start;
        return e;
    }

    inline DelayDopplerEstimate estimate_delay_doppler(const ObservationBlock &y, const ObservationBlock &x_hat, const FrameConfig &frame,
                                                       const AlternatingSearch &opt = {})
    {
        const CMatrix z = correlation_grid(y, x_hat);
        return gss_refine(z, sdft_coarse(z), frame, opt);
    }

} // namespace thz::sensing

#endif
