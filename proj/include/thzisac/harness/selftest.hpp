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

#ifndef THZISAC_HARNESS_SELFTEST_HPP
#define THZISAC_HARNESS_SELFTEST_HPP

#include "experiments.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace thz::harness
{
    struct CheckResult
    {
        std::string name;
        bool passed = false;
        std::string detail;
    };

    namespace detail
    {
        inline std::string sci(double v)
        {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3e", v);
            return buf;
        }

        // Small ray channel and matching designs shared by the precoder checks
        struct PrecodingCase
        {
            geometry::UpaGeometry geom{8, 8};
            waveform::FrameConfig frame = waveform::FrameConfig::make(8, 4, 8, 3.84e6, 0.3e12);
            int n_rf = 4, ns = 2;
            channel::CommChannel channel;
            precoding::FullyDigital digital;
            geometry::SensingCodebook codebook;

            PrecodingCase(std::uint64_t seed, int streams) : ns(streams)
            {
                RngStream rng(seed);
                channel = channel::random_comm_channel({}, frame, geom, geom, rng);
                digital = precoding::optimal_fully_digital(channel, ns);
                codebook = geometry::dft_codebook(geom, kPi / 2);
            }
        };
    } // namespace detail

    // Invariant suite run by `thzisac selftest`
    inline std::vector<CheckResult> run_selftest()
    {
        std::vector<CheckResult> out;
        const std::vector<double> etas{0.0, 0.3, 0.6, 1.0};

        // Feasibility, power and monotonicity over all switch counts and several eta. Both alternating
        // steps are exact minimizers when ||F_RF F_BB[m]||_F is fixed by the constraints, i.e. for a square
        // unitary F_BB (N_s = N_RF) or an AoSA pattern; monotonicity is only claimed there.
        {
            bool feasible = true, monotone = true;
            double worst_power = 0.0, worst_rise = 0.0;
            for (std::uint64_t seed = 1; seed <= 3; ++seed)
            {
                for (int ns : {2, 4})
                {
                    detail::PrecodingCase pc(seed, ns);
                    for (int nc = pc.n_rf; nc <= pc.n_rf * pc.n_rf; nc += 4)
                    {
                        const bool exact_steps = ns == pc.n_rf || nc == pc.n_rf;
                        const auto sw = precoding::SwitchMatrix::with_count(pc.n_rf, nc, pc.geom.size());
                        const precoding::VecOptions opt{30, 1e-12, seed};
                        const auto comm_only = design_precoder("vec", pc.digital, pc.codebook, 3, 1.0, sw, opt);
                        for (double eta : etas)
                            for (const std::string alg : {"vec", "sca"})
                            {
                                const auto prec = design_precoder(alg, pc.digital, pc.codebook, 3, eta, sw, opt, &comm_only);
                                feasible = feasible && prec.analog.feasible(1e-12);
                                for (int m = 0; m < pc.frame.m_subcarriers; ++m)
                                    worst_power = std::max(worst_power, std::abs(prec.combined(m).squaredNorm() - pc.ns));
                                for (std::size_t i = 1; exact_steps && i < prec.objective_trace.size(); ++i)
                                {
                                    const double rise = prec.objective_trace[i] - prec.objective_trace[i - 1];
                                    worst_rise = std::max(worst_rise, rise / std::max(1.0, std::abs(prec.objective_trace[i - 1])));
                                    monotone = monotone && rise <= 1e-10 * std::max(1.0, std::abs(prec.objective_trace[i - 1]));
                                }
                            }
                    }
                }
            }
            out.push_back({"analog precoder feasibility (zero structure, unit modulus)", feasible, feasible ? "all designs feasible" : "infeasible design found"});
            out.push_back({"power normalization ||F_RF F_BB[m]||_F^2 = N_s", worst_power <= 1e-9, "max deviation " + detail::sci(worst_power)});
            out.push_back({"VEC objective non-increasing", monotone, "max relative rise " + detail::sci(worst_rise)});
        }

        // DFT codebook orthonormality at full scale
        {
            const auto cb = geometry::dft_codebook({32, 32}, kPi / 2);
            const double err = (cb.columns.adjoint() * cb.columns - CMatrix::Identity(cb.size(), cb.size())).norm();
            out.push_back({"codebook orthonormality ||A^H A - I||_F", err < 1e-10, detail::sci(err)});
        }

        // sample covariance of a simulated observation is Hermitian PSD
        {
            detail::PrecodingCase pc(7, 2);
            RngStream rng(11);
            const auto sw = precoding::SwitchMatrix::with_count(pc.n_rf, pc.n_rf, pc.geom.size());
            const int q = 2;
            const auto prec = design_precoder("vec", pc.digital, pc.codebook, q, 0.5, sw, {20, 1e-6, 3});
            const auto comb = sensing::receive_combiner(geometry::sensing_window(q, pc.geom).mirrored(), 4, pc.geom, rng);
            const auto sym = waveform::generate_symbols(pc.frame, pc.ns, waveform::Constellation::qpsk, rng);
            channel::SensingScene scene;
            scene.targets.push_back({5.0, 10.0, -geometry::sensing_window(q, pc.geom).lo - 0.01, kPi / 2, {0.3, 0.1}});
            const auto block = sensing::simulate_rx(scene, prec, sym, comb, pc.frame, q, pc.geom, pc.geom, 1.0, rng);
            const CMatrix R = sensing::sample_covariance(block);
            const double herm = (R - R.adjoint()).norm();
            Eigen::SelfAdjointEigenSolver<CMatrix> evd(R);
            const double min_eig = evd.eigenvalues().minCoeff();
            const bool ok = herm <= 1e-12 * R.norm() && min_eig >= -1e-12 * evd.eigenvalues().maxCoeff();
            out.push_back({"sample covariance Hermitian PSD", ok, "min eigenvalue " + detail::sci(min_eig) + ", asymmetry " + detail::sci(herm)});
        }

        // OFDM modulate/demodulate and DFT forward/inverse round trips
        {
            RngStream rng(5);
            const auto cfg = waveform::FrameConfig::make(64, 8, 1, 3.84e6, 0.3e12);
            CMatrix grid(64, 8);
            for (Eigen::Index j = 0; j < grid.cols(); ++j)
                for (Eigen::Index i = 0; i < grid.rows(); ++i)
                    grid(i, j) = rng.complex_normal();
            const double ofdm = (waveform::ofdm_demodulate(waveform::ofdm_modulate(grid, cfg), cfg) - grid).norm() / grid.norm();
            const double dft = (dft::forward_columns(dft::inverse_columns(grid)) - grid).norm() / grid.norm();
            out.push_back({"DFT and OFDM round trip", std::max(ofdm, dft) < 1e-12, "relative error " + detail::sci(std::max(ofdm, dft))});
        }
        return out;
    }

} // namespace thz::harness

#endif
