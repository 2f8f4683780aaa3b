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

#ifndef THZISAC_PRECODING_HPP
#define THZISAC_PRECODING_HPP

#include "channel.hpp"
#include "common.hpp"
#include "geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thz::precoding
{
    using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

    // Switch network between N_RF subarrays (rows) and N_RF RF chains (columns).
    // Subarray i owns the contiguous flat antenna indices [i*K, (i+1)*K).
    struct SwitchMatrix
    {
        BoolMatrix closed;
        int k_t = 1; // antennas per subarray

        int n_rf() const { return int(closed.rows()); }
        int antennas() const { return n_rf() * k_t; }
        int closed_count() const { return int(closed.count()); }

        // N_c = N_RF gives the AoSA diagonal, N_c = N_RF^2 the fully-connected pattern,
        // anything in between adds off-diagonal switches row by row.
        static SwitchMatrix with_count(int n_rf, int n_c, int n_antennas)
        {
            if (n_rf < 1)
                throw std::invalid_argument("SwitchMatrix: need at least one RF chain");
            if (n_antennas % n_rf != 0)
                throw std::invalid_argument("SwitchMatrix: antenna count " + std::to_string(n_antennas) +
                                            " not divisible by RF chain count " + std::to_string(n_rf));
            if (n_c < n_rf || n_c > n_rf * n_rf)
                throw std::invalid_argument("SwitchMatrix: closed switch count must lie in [N_RF, N_RF^2]");
            SwitchMatrix s;
            s.k_t = n_antennas / n_rf;
            s.closed = BoolMatrix::Constant(n_rf, n_rf, false);
            for (int i = 0; i < n_rf; ++i)
                s.closed(i, i) = true;
            int extra = n_c - n_rf;
            for (int i = 0; i < n_rf && extra > 0; ++i)
                for (int j = 0; j < n_rf && extra > 0; ++j)
                    if (!s.closed(i, j))
                    {
                        s.closed(i, j) = true;
                        --extra;
                    }
            return s;
        }
        static SwitchMatrix diagonal(int n_rf, int n_antennas) { return with_count(n_rf, n_rf, n_antennas); }
        static SwitchMatrix full(int n_rf, int n_antennas) { return with_count(n_rf, n_rf * n_rf, n_antennas); }

        // P_S: each switch expanded to a K_t-long all-one or all-zero block
        RMatrix expanded() const
        {
            RMatrix p = RMatrix::Zero(antennas(), n_rf());
            for (int i = 0; i < n_rf(); ++i)
                for (int j = 0; j < n_rf(); ++j)
                    if (closed(i, j))
                        p.block(i * k_t, j, k_t, 1).setOnes();
            return p;
        }
    };

    struct AnalogPrecoder
    {
        CMatrix matrix; // N_t x N_RF
        SwitchMatrix switches;

        // Zero outside closed blocks (exact), unit modulus inside
        bool feasible(double modulus_tol = 1e-12) const
        {
            const int K = switches.k_t;
            if (matrix.rows() != switches.antennas() || matrix.cols() != switches.n_rf())
                return false;
            for (int i = 0; i < switches.n_rf(); ++i)
                for (int j = 0; j < switches.n_rf(); ++j)
                    for (int k = 0; k < K; ++k)
                    {
                        const cd v = matrix(i * K + k, j);
                        if (switches.closed(i, j) ? std::abs(std::abs(v) - 1.0) > modulus_tol : v != cd(0.0))
                            return false;
                    }
            return true;
        }
    };

    struct DigitalPrecoderSet
    {
        std::vector<CMatrix> per_subcarrier; // N_RF x N_s each
    };

    struct HybridPrecoder
    {
        AnalogPrecoder analog;
        DigitalPrecoderSet digital;
        std::vector<double> objective_trace; // VEC only
        int iterations = 0;
        bool converged = true;

        CMatrix combined(int m) const { return analog.matrix * digital.per_subcarrier[std::size_t(m)]; }
    };

    struct PrecodingTargets
    {
        std::vector<CMatrix> comm_opt; // F_c[m], N_t x N_s
        CMatrix sense_opt;             // F_s,q, N_t x N_s
        double eta = 1.0;

        void validate() const
        {
            if (!(eta >= 0.0 && eta <= 1.0))
                throw std::invalid_argument("PrecodingTargets: eta must lie in [0, 1]");
            if (comm_opt.empty())
                throw std::invalid_argument("PrecodingTargets: empty communication targets");
            for (const auto &f : comm_opt)
                if (f.rows() != sense_opt.rows() || f.cols() != sense_opt.cols())
                    throw std::invalid_argument("PrecodingTargets: communication and sensing targets differ in shape");
        }
        // eta F_c[m] + (1 - eta) F_s
        CMatrix blended(std::size_t m) const { return eta * comm_opt[m] + (1.0 - eta) * sense_opt; }
    };

    // ---------------------------------------------------------------------
    // Fully-digital references
    // ---------------------------------------------------------------------

    struct FullyDigital
    {
        std::vector<CMatrix> precoders; // F_c[m], N_t x N_s
        std::vector<CMatrix> combiners; // C_c[m], N_r x N_s
        std::vector<RVector> singular_values;
        bool rank_deficient = false;
    };

    namespace detail
    {
        inline void check_ns(int ns, Eigen::Index rows, Eigen::Index cols)
        {
            if (ns < 1 || ns > std::min(rows, cols))
                throw std::invalid_argument("optimal_fully_digital: ns must lie in [1, min(N_t, N_r)]");
        }
        inline bool below_rank(const RVector &s, int ns)
        {
            const double tol = 1e-12 * std::max(1.0, s.size() ? s(0) : 0.0);
            return s.size() < ns || s(ns - 1) <= tol;
        }
    } // namespace detail

    // Leading N_s singular vectors of each dense H[m]
    inline FullyDigital optimal_fully_digital(const std::vector<CMatrix> &channels, int ns)
    {
        FullyDigital out;
        for (const auto &H : channels)
        {
            detail::check_ns(ns, H.rows(), H.cols());
            Eigen::BDCSVD<CMatrix> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
            out.precoders.push_back(svd.matrixV().leftCols(ns));
            out.combiners.push_back(svd.matrixU().leftCols(ns));
            out.singular_values.push_back(svd.singularValues());
            out.rank_deficient = out.rank_deficient || detail::below_rank(svd.singularValues(), ns);
        }
        return out;
    }

    // Same result for a ray channel without forming the N_r x N_t matrices: QR of both steering
    // matrices and an SVD of the small (paths x paths) core.
    inline FullyDigital optimal_fully_digital(const channel::CommChannel &ch, int ns)
    {
        detail::check_ns(ns, ch.nr(), ch.nt());
        const auto P = ch.tx_steering().cols();
        if (ns > P)
        {
            std::vector<CMatrix> dense;
            for (int m = 0; m < ch.subcarriers(); ++m)
                dense.push_back(ch.matrix(m));
            auto out = optimal_fully_digital(dense, ns);
            out.rank_deficient = true;
            return out;
        }
        Eigen::HouseholderQR<CMatrix> qt(ch.tx_steering()), qr(ch.rx_steering());
        const CMatrix Qt = qt.householderQ() * CMatrix::Identity(ch.nt(), P);
        const CMatrix Qr = qr.householderQ() * CMatrix::Identity(ch.nr(), P);
        const CMatrix Rt = qt.matrixQR().topRows(P).triangularView<Eigen::Upper>();
        const CMatrix Rr = qr.matrixQR().topRows(P).triangularView<Eigen::Upper>();

        FullyDigital out;
        for (int m = 0; m < ch.subcarriers(); ++m)
        {
            const CMatrix core = ch.gamma() * Rr * ch.gains(m).asDiagonal() * Rt.adjoint();
            Eigen::JacobiSVD<CMatrix> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
            out.precoders.push_back(Qt * svd.matrixV().leftCols(ns));
            out.combiners.push_back(Qr * svd.matrixU().leftCols(ns));
            out.singular_values.push_back(svd.singularValues());
            out.rank_deficient = out.rank_deficient || detail::below_rank(svd.singularValues(), ns);
        }
        return out;
    }

    // All N_s columns equal the codebook direction. The codebook column is taken with unit-modulus
    // entries scaled by 1/sqrt(N_t), i.e. the unit-norm steering vector, so ||F_s||_F^2 = N_s.
    inline CMatrix optimal_sensing_precoder(const geometry::SensingCodebook &codebook, int q, int ns)
    {
        if (ns < 1)
            throw std::invalid_argument("optimal_sensing_precoder: ns must be >= 1");
        const CVector a = codebook.column(q);
        return a * Eigen::RowVectorXcd::Ones(ns);
    }

    // ---------------------------------------------------------------------
    // VEC alternating minimization
    // ---------------------------------------------------------------------

    // argmax_{F^H F = I} Re tr(F^H (G^H B)^H): F = V_1 U^H with G^H B = U S V^H.
    // gb is G^H B (N_s x N_RF).
    inline CMatrix orthogonal_procrustes(const CMatrix &gb)
    {
        const auto ns = gb.rows();
        if (ns > gb.cols())
            throw std::invalid_argument("orthogonal_procrustes: N_s exceeds N_RF");
        Eigen::JacobiSVD<CMatrix> svd(gb, Eigen::ComputeFullU | Eigen::ComputeFullV);
        return svd.matrixV().leftCols(ns) * svd.matrixU().adjoint();
    }

    // G^H B for the stacked targets reduces to (eta F_c + (1 - eta) F_s)^H F_RF
    inline CMatrix vec_digital_update(const CMatrix &blended_target, const CMatrix &f_rf)
    {
        return orthogonal_procrustes(blended_target.adjoint() * f_rf);
    }

    inline std::vector<CMatrix> vec_digital_update(const PrecodingTargets &t, const CMatrix &f_rf)
    {
        std::vector<CMatrix> out(t.comm_opt.size());
        for (std::size_t m = 0; m < out.size(); ++m)
            out[m] = vec_digital_update(t.blended(m), f_rf);
        return out;
    }

    // Phase alignment of closed blocks with sum_m (eta F_c[m] + (1 - eta) F_s) F_BB[m]^H.
    // Entries whose argument has zero magnitude keep the phase of `previous`.
    inline AnalogPrecoder vec_analog_update(const PrecodingTargets &t, const std::vector<CMatrix> &f_bb,
                                            const SwitchMatrix &sw, const CMatrix &previous)
    {
        if (f_bb.size() != t.comm_opt.size())
            throw std::invalid_argument("vec_analog_update: digital precoder count mismatch");
        const auto nt = t.sense_opt.rows();
        if (nt != sw.antennas() || previous.rows() != nt || previous.cols() != sw.n_rf())
            throw std::invalid_argument("vec_analog_update: dimension mismatch");
        CMatrix comm_part = CMatrix::Zero(nt, sw.n_rf());
        CMatrix bb_sum = CMatrix::Zero(sw.n_rf(), t.sense_opt.cols());
        for (std::size_t m = 0; m < f_bb.size(); ++m)
        {
            comm_part.noalias() += t.comm_opt[m] * f_bb[m].adjoint();
            bb_sum += f_bb[m];
        }
        const CMatrix S = t.eta * comm_part + (1.0 - t.eta) * (t.sense_opt * bb_sum.adjoint());

        AnalogPrecoder out{CMatrix::Zero(nt, sw.n_rf()), sw};
        const int K = sw.k_t;
        for (int i = 0; i < sw.n_rf(); ++i)
            for (int j = 0; j < sw.n_rf(); ++j)
            {
                if (!sw.closed(i, j))
                    continue;
                for (int k = 0; k < K; ++k)
                {
                    const cd s = S(i * K + k, j);
                    const cd prev = previous(i * K + k, j);
                    if (std::abs(s) > 0.0)
                        out.matrix(i * K + k, j) = s / std::abs(s);
                    else
                        out.matrix(i * K + k, j) = std::abs(prev) > 0.0 ? prev / std::abs(prev) : cd(1.0);
                }
            }
        return out;
    }

    // (1/M) sum_m eta ||F_c[m] - F_RF F_BB[m]||^2 + (1 - eta) ||F_s - F_RF F_BB[m]||^2, evaluated directly
    inline double weighted_objective(const PrecodingTargets &t, const CMatrix &f_rf, const std::vector<CMatrix> &f_bb)
    {
        double acc = 0.0;
        for (std::size_t m = 0; m < f_bb.size(); ++m)
        {
            const CMatrix F = f_rf * f_bb[m];
            acc += t.eta * (t.comm_opt[m] - F).squaredNorm() + (1.0 - t.eta) * (t.sense_opt - F).squaredNorm();
        }
        return acc / double(f_bb.size());
    }

    namespace detail
    {
        // Trace-identity form of weighted_objective; avoids N_t x N_s products per subcarrier.
        inline double objective_fast(const PrecodingTargets &t, const CMatrix &f_rf, const std::vector<CMatrix> &f_bb,
                                     const std::vector<double> &target_energy)
        {
            const CMatrix gram = f_rf.adjoint() * f_rf;
            const CMatrix rf_s = f_rf.adjoint() * t.sense_opt;
            double acc = 0.0;
            for (std::size_t m = 0; m < f_bb.size(); ++m)
            {
                const CMatrix proj = t.eta * (f_rf.adjoint() * t.comm_opt[m]) + (1.0 - t.eta) * rf_s;
                const double own = (f_bb[m].adjoint() * gram * f_bb[m]).trace().real();
                const double cross = (f_bb[m].adjoint() * proj).trace().real();
                acc += target_energy[m] + own - 2.0 * cross;
            }
            return acc / double(f_bb.size());
        }

        // sqrt(N_s) F_RF^+ X / ||F_RF F_RF^+ X||_F
        inline std::vector<CMatrix> normalized_pinv_digital(const CMatrix &f_rf, const std::vector<CMatrix> &targets, int ns)
        {
            Eigen::CompleteOrthogonalDecomposition<CMatrix> cod;
            cod.setThreshold(1e-6); // near-null analog directions only amplify rounding
            cod.compute(f_rf);
            std::vector<CMatrix> out(targets.size());
            for (std::size_t m = 0; m < targets.size(); ++m)
            {
                CMatrix bb = cod.solve(targets[m]);
                const double nrm = (f_rf * bb).norm();
                if (!(nrm > 0.0))
                    throw std::runtime_error("hybrid precoding: target orthogonal to analog precoder range");
                out[m] = (std::sqrt(double(ns)) / nrm) * bb;
            }
            return out;
        }
    } // namespace detail

    struct VecOptions
    {
        int max_iter = 50;
        double tol = 1e-4;
        std::uint64_t seed = 1;
    };

    inline HybridPrecoder vec_hybrid_precoding(const PrecodingTargets &t, const SwitchMatrix &sw, const VecOptions &opt = {})
    {
        t.validate();
        const auto nt = t.sense_opt.rows();
        const int ns = int(t.sense_opt.cols());
        if (nt != sw.antennas())
            throw std::invalid_argument("vec_hybrid_precoding: switch pattern covers " + std::to_string(sw.antennas()) +
                                        " antennas, targets have " + std::to_string(nt));
        if (ns > sw.n_rf())
            throw std::invalid_argument("vec_hybrid_precoding: N_s exceeds N_RF");

        std::vector<double> energy(t.comm_opt.size());
        for (std::size_t m = 0; m < energy.size(); ++m)
            energy[m] = t.eta * t.comm_opt[m].squaredNorm() + (1.0 - t.eta) * t.sense_opt.squaredNorm();

        // Random-phase start, then one analog update against identity digital precoders
        RngStream rng(opt.seed);
        CMatrix start(nt, sw.n_rf());
        for (Eigen::Index j = 0; j < start.cols(); ++j)
            for (Eigen::Index i = 0; i < nt; ++i)
                start(i, j) = cis(rng.phase());
        std::vector<CMatrix> f_bb(t.comm_opt.size(), CMatrix::Identity(sw.n_rf(), ns));
        HybridPrecoder out;
        out.analog = vec_analog_update(t, f_bb, sw, start);

        double prev = std::numeric_limits<double>::infinity(), best = prev;
        AnalogPrecoder best_analog = out.analog;
        out.converged = false;
        for (int it = 0; it < opt.max_iter; ++it)
        {
            f_bb = vec_digital_update(t, out.analog.matrix);
            out.analog = vec_analog_update(t, f_bb, sw, out.analog.matrix);
            const double obj = detail::objective_fast(t, out.analog.matrix, f_bb, energy);
            out.objective_trace.push_back(obj);
            out.iterations = it + 1;
            if (obj < best)
            {
                best = obj;
                best_analog = out.analog;
            }
            if (std::isfinite(prev) && std::abs(prev - obj) <= opt.tol * std::max(std::abs(prev), 1e-300))
            {
                out.converged = true;
                break;
            }
            prev = obj;
        }
        // the Procrustes step is inexact outside Ns = N_RF or AoSA, so the last iterate need not be the best
        out.analog = std::move(best_analog);

        std::vector<CMatrix> blended(t.comm_opt.size());
        for (std::size_t m = 0; m < blended.size(); ++m)
            blended[m] = t.blended(m);
        out.digital.per_subcarrier = detail::normalized_pinv_digital(out.analog.matrix, blended, ns);
        return out;
    }

    // ---------------------------------------------------------------------
    // SCA codebook-assisted update
    // ---------------------------------------------------------------------

    inline int sca_replaced_blocks(int n_c, double eta)
    {
        // guard against 0.6 * 10 evaluating to 4.0000000001
        return int(std::ceil(n_c * (1.0 - eta) - 1e-9));
    }

    inline HybridPrecoder sca_hybrid_precoding(const std::vector<CMatrix> &comm_opt, const geometry::SensingCodebook &codebook,
                                               int q, double eta, const AnalogPrecoder &comm_analog)
    {
        if (!(eta >= 0.0 && eta <= 1.0))
            throw std::invalid_argument("sca_hybrid_precoding: eta must lie in [0, 1]");
        if (comm_opt.empty())
            throw std::invalid_argument("sca_hybrid_precoding: empty communication targets");
        const SwitchMatrix &sw = comm_analog.switches;
        const int K = sw.k_t, ns = int(comm_opt.front().cols());
        const CVector a = codebook.column(q);
        if (a.size() != sw.antennas())
            throw std::invalid_argument("sca_hybrid_precoding: codebook size does not match array");
        const CVector a_unit_modulus = std::sqrt(double(a.size())) * a;

        struct BlockError
        {
            double err;
            int i, j;
        };
        std::vector<BlockError> errs;
        for (int i = 0; i < sw.n_rf(); ++i)
            for (int j = 0; j < sw.n_rf(); ++j)
                if (sw.closed(i, j))
                    errs.push_back({(a_unit_modulus.segment(i * K, K) - comm_analog.matrix.block(i * K, j, K, 1)).norm(), i, j});
        std::stable_sort(errs.begin(), errs.end(), [](const BlockError &x, const BlockError &y)
                         { return x.err < y.err; });

        HybridPrecoder out;
        out.analog = comm_analog;
        const int ks = std::min<int>(sca_replaced_blocks(sw.closed_count(), eta), int(errs.size()));
        for (int k = 0; k < ks; ++k)
            out.analog.matrix.block(errs[std::size_t(k)].i * K, errs[std::size_t(k)].j, K, 1) =
                a_unit_modulus.segment(errs[std::size_t(k)].i * K, K);

        const CMatrix f_s = optimal_sensing_precoder(codebook, q, ns);
        std::vector<CMatrix> weighted(comm_opt.size());
        for (std::size_t m = 0; m < comm_opt.size(); ++m)
        {
            const CMatrix f = std::sqrt(eta) * comm_opt[m] + std::sqrt(1.0 - eta) * f_s;
            weighted[m] = (std::sqrt(double(ns)) / f.norm()) * f;
        }
        out.digital.per_subcarrier = detail::normalized_pinv_digital(out.analog.matrix, weighted, ns);
        return out;
    }

    // ---------------------------------------------------------------------
    // Metrics
    // ---------------------------------------------------------------------

    struct RateResult
    {
        double bits = 0.0; // bits/s/Hz
        bool regularized = false;
    };

    namespace detail
    {
        inline double log2det_hpd(const CMatrix &A, bool &ok)
        {
            Eigen::LLT<CMatrix> llt(A);
            ok = llt.info() == Eigen::Success;
            if (!ok)
                return 0.0;
            double s = 0.0;
            for (Eigen::Index i = 0; i < A.rows(); ++i)
                s += std::log2(llt.matrixL()(i, i).real());
            return 2.0 * s;
        }
    } // namespace detail

    // (1/M) sum_m log2 det(I + rho/N_s R_n^{-1} C^H H F F^H H^H C), R_n = sigma2 C^H C.
    // F[m] and C[m] are the full transmit precoder and receive combiner.
    inline RateResult spectral_efficiency(const channel::CommChannel &ch, const std::vector<CMatrix> &precoders,
                                          const std::vector<CMatrix> &combiners, double rho, double sigma2)
    {
        const int M = ch.subcarriers();
        if (int(combiners.size()) != M || int(precoders.size()) != M)
            throw std::invalid_argument("spectral_efficiency: need one precoder and combiner per subcarrier");
        if (!(sigma2 > 0.0) || rho < 0.0)
            throw std::invalid_argument("spectral_efficiency: need sigma2 > 0 and rho >= 0");
        RateResult r;
        for (int m = 0; m < M; ++m)
        {
            const CMatrix &C = combiners[std::size_t(m)];
            const CMatrix &F = precoders[std::size_t(m)];
            const int ns = int(F.cols());
            const CMatrix eff = C.adjoint() * ch.apply(m, F);
            CMatrix Rn = sigma2 * (C.adjoint() * C);
            const CMatrix signal = (rho / ns) * eff * eff.adjoint();
            bool ok_n = false, ok_s = false;
            double ld_n = detail::log2det_hpd(Rn, ok_n);
            if (!ok_n)
            {
                Rn += 1e-12 * std::max(Rn.trace().real() / double(Rn.rows()), 1e-300) * CMatrix::Identity(Rn.rows(), Rn.cols());
                ld_n = detail::log2det_hpd(Rn, ok_n);
                r.regularized = true;
            }
            const double ld_total = detail::log2det_hpd(Rn + signal, ok_s);
            if (!ok_n || !ok_s)
                throw std::runtime_error("spectral_efficiency: covariance not positive definite");
            r.bits += std::max(0.0, ld_total - ld_n);
        }
        r.bits /= double(M);
        return r;
    }

    inline RateResult spectral_efficiency(const channel::CommChannel &ch, const HybridPrecoder &prec,
                                          const std::vector<CMatrix> &combiners, double rho, double sigma2)
    {
        std::vector<CMatrix> f(prec.digital.per_subcarrier.size());
        for (std::size_t m = 0; m < f.size(); ++m)
            f[m] = prec.combined(int(m));
        return spectral_efficiency(ch, f, combiners, rho, sigma2);
    }

    // Transmit gain (N_t / N_s) (1/M) sum_m ||a^H(theta, phi) F_RF F_BB[m]||^2 in linear scale.
    // An isotropic allocation averages to 1 (0 dBi), a matched codebook beam reaches N_t.
    inline RVector transmit_beampattern_linear(const HybridPrecoder &prec, const std::vector<double> &thetas, double phi,
                                               const geometry::UpaGeometry &geom)
    {
        const auto &bb = prec.digital.per_subcarrier;
        if (bb.empty())
            throw std::invalid_argument("transmit_beampattern: no digital precoders");
        const auto nrf = prec.analog.matrix.cols();
        const int ns = int(bb.front().cols());
        CMatrix Q = CMatrix::Zero(nrf, nrf);
        for (const auto &f : bb)
            Q.noalias() += f * f.adjoint();
        Q /= double(bb.size());
        const CMatrix A = geometry::steering_matrix(thetas, phi, geom);
        const CMatrix P = A.adjoint() * prec.analog.matrix; // grid x N_RF
        const CMatrix PQ = P * Q;
        RVector g(P.rows());
        const double scale = double(geom.size()) / ns;
        for (Eigen::Index i = 0; i < P.rows(); ++i)
            g(i) = scale * std::max(0.0, PQ.row(i).dot(P.row(i)).real());
        return g;
    }

    inline RVector transmit_beampattern(const HybridPrecoder &prec, const std::vector<double> &thetas, double phi,
                                        const geometry::UpaGeometry &geom)
    {
        RVector g = transmit_beampattern_linear(prec, thetas, phi, geom);
        for (Eigen::Index i = 0; i < g.size(); ++i)
            g(i) = 10.0 * std::log10(std::max(g(i), 1e-30));
        return g;
    }

    inline double transmit_gain_dbi(const HybridPrecoder &prec, double theta, double phi, const geometry::UpaGeometry &geom)
    {
        return transmit_beampattern(prec, {theta}, phi, geom)(0);
    }

    // Same gain for unconstrained N_t x N_s precoders (one entry per subcarrier, or a single one)
    inline RVector transmit_beampattern_linear(const std::vector<CMatrix> &precoders, const std::vector<double> &thetas,
                                               double phi, const geometry::UpaGeometry &geom)
    {
        if (precoders.empty())
            throw std::invalid_argument("transmit_beampattern: no precoders");
        const CMatrix A = geometry::steering_matrix(thetas, phi, geom);
        const int ns = int(precoders.front().cols());
        RVector g = RVector::Zero(A.cols());
        for (const auto &F : precoders)
            g += (A.adjoint() * F).rowwise().squaredNorm();
        return (double(geom.size()) / (ns * double(precoders.size()))) * g;
    }

} // namespace thz::precoding

#endif
