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

#ifndef THZISAC_WAVEFORM_HPP
#define THZISAC_WAVEFORM_HPP

#include "common.hpp"

#include <unsupported/Eigen/FFT>

#include <stdexcept>
#include <string>
#include <vector>

namespace thz
{
    // Unitary DFT helpers (1/sqrt(n) on both directions).
    namespace dft
    {
        inline Eigen::FFT<double> &engine()
        {
            thread_local Eigen::FFT<double> fft;
            return fft;
        }

        // out[k] = 1/sqrt(n) * sum_i in[i] e^{-j 2 pi i k / n}
        inline void forward(const cd *in, cd *out, Eigen::Index n)
        {
            if (n == 1) // kissfft cannot plan a length-1 transform
            {
                out[0] = in[0];
                return;
            }
            engine().fwd(out, in, n);
            const double s = 1.0 / std::sqrt(double(n));
            for (Eigen::Index i = 0; i < n; ++i)
                out[i] *= s;
        }

        // out[i] = 1/sqrt(n) * sum_k in[k] e^{+j 2 pi i k / n}
        inline void inverse(const cd *in, cd *out, Eigen::Index n)
        {
            if (n == 1)
            {
                out[0] = in[0];
                return;
            }
            engine().inv(out, in, n); // scaled by 1/n
            const double s = std::sqrt(double(n));
            for (Eigen::Index i = 0; i < n; ++i)
                out[i] *= s;
        }

        inline CVector forward(const CVector &x)
        {
            CVector y(x.size());
            forward(x.data(), y.data(), x.size());
            return y;
        }
        inline CVector inverse(const CVector &x)
        {
            CVector y(x.size());
            inverse(x.data(), y.data(), x.size());
            return y;
        }

        // Column-wise transforms of a matrix
        inline CMatrix forward_columns(const CMatrix &X)
        {
            CMatrix Y(X.rows(), X.cols());
            for (Eigen::Index c = 0; c < X.cols(); ++c)
                forward(X.col(c).data(), Y.col(c).data(), X.rows());
            return Y;
        }
        inline CMatrix inverse_columns(const CMatrix &X)
        {
            CMatrix Y(X.rows(), X.cols());
            for (Eigen::Index c = 0; c < X.cols(); ++c)
                inverse(X.col(c).data(), Y.col(c).data(), X.rows());
            return Y;
        }

        // Normalized DFT matrix F_n(a, b) = e^{-j 2 pi a b / n} / sqrt(n)
        inline CMatrix matrix(int n)
        {
            CMatrix F(n, n);
            const double s = 1.0 / std::sqrt(double(n));
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    F(a, b) = s * cis(-2.0 * kPi * double((long long)a * b % n) / n);
            return F;
        }
    } // namespace dft

    namespace waveform
    {
        // OFDM frame numerology. All durations follow from delta_f and the CP ratio m_cp / m_subcarriers.
        struct FrameConfig
        {
            int m_subcarriers = 64; // M
            int n_symbols = 16;     // N
            int q_slots = 32;       // Q
            int m_cp = 16;          // CP size in samples
            double delta_f = 3.84e6; // subcarrier spacing [Hz]
            double fc = 0.3e12;      // carrier frequency [Hz]

            static FrameConfig make(int M, int N, int Q, double delta_f, double fc)
            {
                FrameConfig c;
                c.m_subcarriers = M;
                c.n_symbols = N;
                c.q_slots = Q;
                c.m_cp = M / 4;
                c.delta_f = delta_f;
                c.fc = fc;
                return c;
            }

            double symbol_duration() const { return 1.0 / delta_f; }                                      // T
            double cp_duration() const { return double(m_cp) / double(m_subcarriers) / delta_f; }        // T_cp
            double total_symbol_duration() const { return double(m_subcarriers + m_cp) / double(m_subcarriers) / delta_f; } // T_o
            double slot_duration() const { return n_symbols * total_symbol_duration(); }                  // T_s
            double frame_duration() const { return q_slots * slot_duration(); }                           // T_f
            double sample_period() const { return symbol_duration() / m_subcarriers; }                   // T / M
            int samples_per_symbol() const { return m_subcarriers + m_cp; }
            int resource_elements() const { return m_subcarriers * n_symbols; }

            void validate() const
            {
                if (m_subcarriers < 1 || n_symbols < 1 || q_slots < 1)
                    throw std::invalid_argument("FrameConfig: M, N, Q must be >= 1");
                if (m_cp < 0 || m_cp > m_subcarriers)
                    throw std::invalid_argument("FrameConfig: CP size must lie in [0, M]");
                if (!(delta_f > 0.0) || !(fc > 0.0))
                    throw std::invalid_argument("FrameConfig: delta_f and fc must be positive");
            }
        };

        enum class Constellation
        {
            qpsk,
            bpsk,
            gaussian
        };

        inline Constellation parse_constellation(const std::string &name)
        {
            if (name == "qpsk")
                return Constellation::qpsk;
            if (name == "bpsk")
                return Constellation::bpsk;
            if (name == "gaussian")
                return Constellation::gaussian;
            throw std::invalid_argument("unknown constellation '" + name + "'");
        }

        // Data symbols s[m, n] in C^{Ns}. Column index is m + n * M.
        struct SymbolFrame
        {
            int ns = 1;
            int m_subcarriers = 0;
            int n_symbols = 0;
            CMatrix symbols; // ns x (M * N)

            Eigen::Index column(int m, int n) const { return Eigen::Index(m) + Eigen::Index(n) * m_subcarriers; }
            auto at(int m, int n) const { return symbols.col(column(m, n)); }
        };

        // i.i.d. symbols with per-entry power 1/Ns so that E{s s^H} = I / Ns
        inline SymbolFrame generate_symbols(const FrameConfig &cfg, int ns, Constellation constellation, RngStream &rng)
        {
            cfg.validate();
            if (ns < 1)
                throw std::invalid_argument("generate_symbols: ns must be >= 1");
            SymbolFrame f{ns, cfg.m_subcarriers, cfg.n_symbols, CMatrix(ns, cfg.resource_elements())};
            const double amp = 1.0 / std::sqrt(double(ns));
            const double qpsk = amp / std::sqrt(2.0);
            for (Eigen::Index c = 0; c < f.symbols.cols(); ++c)
                for (Eigen::Index s = 0; s < ns; ++s)
                {
                    switch (constellation)
                    {
                    case Constellation::qpsk:
                    {
                        const auto bits = rng.engine()();
                        f.symbols(s, c) = {(bits & 1) ? qpsk : -qpsk, (bits & 2) ? qpsk : -qpsk};
                        break;
                    }
                    case Constellation::bpsk:
                        f.symbols(s, c) = (rng.engine()() & 1) ? amp : -amp;
                        break;
                    case Constellation::gaussian:
                        f.symbols(s, c) = rng.complex_normal(1.0 / ns);
                        break;
                    }
                }
            return f;
        }

        // Per-antenna frequency grid X_ant[:, m + n*M] = F_RF F_BB[m] s[m, n]
        inline CMatrix precode_frequency(const SymbolFrame &sym, const CMatrix &f_rf, const std::vector<CMatrix> &f_bb)
        {
            if (int(f_bb.size()) != sym.m_subcarriers)
                throw std::invalid_argument("precode_frequency: need one digital precoder per subcarrier");
            CMatrix out(f_rf.rows(), sym.symbols.cols());
            for (int m = 0; m < sym.m_subcarriers; ++m)
            {
                const CMatrix &bb = f_bb[std::size_t(m)];
                if (bb.rows() != f_rf.cols() || bb.cols() != sym.ns)
                    throw std::invalid_argument("precode_frequency: digital precoder dimension mismatch at subcarrier " + std::to_string(m));
                const CMatrix F = f_rf * bb;
                for (int n = 0; n < sym.n_symbols; ++n)
                    out.col(sym.column(m, n)) = F * sym.at(m, n);
            }
            return out;
        }

        // Unitary IDFT per symbol plus cyclic prefix. grid is M x N; output length N * (M + M_cp).
        inline CVector ofdm_modulate(const CMatrix &grid, const FrameConfig &cfg)
        {
            cfg.validate();
            const int M = cfg.m_subcarriers, N = cfg.n_symbols, L = cfg.samples_per_symbol();
            if (grid.rows() != M || grid.cols() != N)
                throw std::invalid_argument("ofdm_modulate: grid must be M x N");
            CVector out(Eigen::Index(N) * L);
            CVector body(M);
            for (int n = 0; n < N; ++n)
            {
                dft::inverse(grid.col(n).data(), body.data(), M);
                out.segment(Eigen::Index(n) * L, cfg.m_cp) = body.tail(cfg.m_cp);
                out.segment(Eigen::Index(n) * L + cfg.m_cp, M) = body;
            }
            return out;
        }

        // Drop the CP of each symbol and apply the unitary DFT
        inline CMatrix ofdm_demodulate(const CVector &samples, const FrameConfig &cfg)
        {
            cfg.validate();
            const int M = cfg.m_subcarriers, N = cfg.n_symbols, L = cfg.samples_per_symbol();
            if (samples.size() != Eigen::Index(N) * L)
                throw std::invalid_argument("ofdm_demodulate: expected N * (M + M_cp) samples");
            CMatrix grid(M, N);
            for (int n = 0; n < N; ++n)
                dft::forward(samples.data() + Eigen::Index(n) * L + cfg.m_cp, grid.col(n).data(), M);
            return grid;
        }

    } // namespace waveform
} // namespace thz

#endif
