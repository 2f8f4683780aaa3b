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

#ifndef THZISAC_COMMON_HPP
#define THZISAC_COMMON_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace thz
{
    using cd = std::complex<double>;
    using CMatrix = Eigen::MatrixXcd;
    using CVector = Eigen::VectorXcd;
    using RMatrix = Eigen::MatrixXd;
    using RVector = Eigen::VectorXd;

    inline constexpr double kPi = std::numbers::pi;
    inline constexpr double kSpeedOfLight = 299'792'458.0; // [m/s]

    constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
    constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

    // e^{j x}
    inline cd cis(double x) { return {std::cos(x), std::sin(x)}; }

    // SplitMix64 finalizer, used to derive independent child seeds
    constexpr std::uint64_t mix64(std::uint64_t z)
    {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Child seed for (experiment, trial). Depends only on its own indices, so changing
    // the number of trials never reshuffles the streams of earlier trials.
    constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t experiment, std::uint64_t trial)
    {
        return mix64(mix64(mix64(root) ^ (experiment * 0xD1B54A32D192ED03ULL)) ^ (trial * 0x8CB92BA72F3D8DD7ULL));
    }

    // Deterministic random stream owned by a single trial.
    class RngStream
    {
    public:
        explicit RngStream(std::uint64_t seed) : engine_(seed) {}

        RngStream child(std::uint64_t index) { return RngStream(mix64(engine_() ^ mix64(index))); }

        double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
        double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
        double normal() { return normal_(engine_); }
        double phase() { return uniform(-kPi, kPi); }

        // Circularly-symmetric complex Gaussian with E|z|^2 = variance
        cd complex_normal(double variance = 1.0)
        {
            const double s = std::sqrt(variance / 2.0);
            const double re = normal_(engine_);
            const double im = normal_(engine_);
            return {s * re, s * im};
        }

        std::mt19937_64 &engine() { return engine_; }

    private:
        std::mt19937_64 engine_;
        std::normal_distribution<double> normal_{0.0, 1.0};
    };

    // 10^(x/10) and back
    inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }
    inline double lin2db(double lin) { return 10.0 * std::log10(lin); }

} // namespace thz

#endif
