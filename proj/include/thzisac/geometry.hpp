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

#ifndef THZISAC_GEOMETRY_HPP
#define THZISAC_GEOMETRY_HPP

#include "common.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace thz::geometry
{
    // Uniform planar array in the yz-plane, half-wavelength spacing.
    // Flat element index is l * w_count + w (z-major Kronecker order a_z ⊗ a_y).
    struct UpaGeometry
    {
        int w_count = 1; // elements on the y-axis
        int l_count = 1; // elements on the z-axis

        int size() const { return w_count * l_count; }

        void validate() const
        {
            if (w_count < 1 || l_count < 1)
                throw std::invalid_argument("UpaGeometry: element counts must be >= 1");
        }
    };

    // Array response a(theta, phi) = a_z(phi) ⊗ a_y(theta, phi), unit norm.
    // Entry (l * W + w) = exp(j*pi*(w*sin(theta)*sin(phi) + l*cos(phi))) / sqrt(W*L)
    inline CVector steering_upa(double theta, double phi, const UpaGeometry &geom)
    {
        geom.validate();
        const int W = geom.w_count, L = geom.l_count;
        const double scale = 1.0 / std::sqrt(double(W) * double(L));
        const double ky = kPi * std::sin(theta) * std::sin(phi);
        const double kz = kPi * std::cos(phi);

        CVector ay(W), az(L);
        for (int w = 0; w < W; ++w)
            ay(w) = cis(ky * w);
        for (int l = 0; l < L; ++l)
            az(l) = cis(kz * l);

        CVector a(W * L);
        for (int l = 0; l < L; ++l)
            a.segment(l * W, W) = az(l) * scale * ay;
        return a;
    }

    // Steering matrix with one column per azimuth angle (shared elevation)
    inline CMatrix steering_matrix(const std::vector<double> &thetas, double phi, const UpaGeometry &geom)
    {
        CMatrix A(geom.size(), Eigen::Index(thetas.size()));
        for (std::size_t i = 0; i < thetas.size(); ++i)
            A.col(Eigen::Index(i)) = steering_upa(thetas[i], phi, geom);
        return A;
    }

    struct SensingCodebook
    {
        CMatrix columns;                     // W*L x Q, unit-norm columns
        std::vector<double> direction_angles; // omega_q [rad], q = 1..Q stored at index q-1
        double elevation = kPi / 2;

        int size() const { return int(columns.cols()); }

        // 1-based slot index
        CVector column(int q) const
        {
            if (q < 1 || q > size())
                throw std::domain_error("SensingCodebook: slot index out of range");
            return columns.col(q - 1);
        }
        double direction(int q) const
        {
            if (q < 1 || q > size())
                throw std::domain_error("SensingCodebook: slot index out of range");
            return direction_angles[std::size_t(q - 1)];
        }
    };

    // sin(omega_q) for the DFT grid, q in 1..W
    inline double codebook_sine(int q, int w_count) { return -1.0 + 1.0 / w_count + (q - 1) * 2.0 / w_count; }

    // DFT sensing codebook with Q = W directions at elevation phi
    inline SensingCodebook dft_codebook(const UpaGeometry &geom, double phi)
    {
        geom.validate();
        SensingCodebook cb;
        cb.elevation = phi;
        const int W = geom.w_count;
        cb.columns.resize(geom.size(), W);
        cb.direction_angles.resize(std::size_t(W));
        for (int q = 1; q <= W; ++q)
        {
            const double omega = std::asin(codebook_sine(q, W));
            cb.direction_angles[std::size_t(q - 1)] = omega;
            cb.columns.col(q - 1) = steering_upa(omega, phi, geom);
        }
        return cb;
    }

    struct AngularWindow
    {
        double lo = 0.0; // [rad]
        double hi = 0.0; // [rad]
        int slot_index = 0;

        bool contains(double theta) const { return theta >= lo && theta <= hi; }
        double width() const { return hi - lo; }

        // -Omega_q: the azimuth interval illuminated by slot q under the transposed transmit steering
        AngularWindow mirrored() const { return {-hi, -lo, slot_index}; }
    };

    // Omega_q = [asin(-1 + (q-1)*2/W), asin(-1 + q*2/W)], q in 1..W
    inline AngularWindow sensing_window(int q, const UpaGeometry &geom)
    {
        geom.validate();
        const int W = geom.w_count;
        if (q < 1 || q > W)
            throw std::domain_error("sensing_window: slot index " + std::to_string(q) + " outside [1, " + std::to_string(W) + "]");
        auto grid = [W](int k)
        {
            // endpoints are exact at k = 0 and k = W
            if (k == 0)
                return -kPi / 2;
            if (k == W)
                return kPi / 2;
            return std::asin(-1.0 + k * 2.0 / W);
        };
        return {grid(q - 1), grid(q), q};
    }

    // Slot whose mirrored window -Omega_q contains azimuth theta
    inline int slot_for_target(double theta, const UpaGeometry &geom)
    {
        const int W = geom.w_count;
        const double s = -std::sin(theta);
        int q = int(std::floor((s + 1.0) * W / 2.0)) + 1;
        return std::clamp(q, 1, W);
    }

} // namespace thz::geometry

#endif
