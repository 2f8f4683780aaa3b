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

#ifndef THZISAC_GOLDEN_SECTION_HPP
#define THZISAC_GOLDEN_SECTION_HPP

#include <cmath>
#include <stdexcept>

namespace thz
{
    struct LineMaximum
    {
        double x = 0.0;
        double value = 0.0;
        int evaluations = 0;
    };

    // Golden-section maximization of f on [lo, hi]. Stops after max_iter shrink steps or when
    // the bracket is narrower than tol. Returns the best point seen, including the endpoints.
    template <typename Fn>
    LineMaximum golden_section_max(Fn &&f, double lo, double hi, int max_iter, double tol)
    {
        if (!(hi >= lo))
            throw std::invalid_argument("golden_section_max: empty interval");
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        LineMaximum best;
        auto track = [&](double x, double v)
        {
            ++best.evaluations;
            if (best.evaluations == 1 || v > best.value)
            {
                best.x = x;
                best.value = v;
            }
            return v;
        };

        double a = lo, b = hi;
        double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
        double fc = track(c, f(c)), fd = track(d, f(d));
        for (int it = 0; it < max_iter && (b - a) > tol; ++it)
        {
            if (fc >= fd)
            {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = track(c, f(c));
            }
            else
            {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = track(d, f(d));
            }
        }
        track(lo, f(lo));
        track(hi, f(hi));
        return best;
    }

    struct PlaneMaximum
    {
        double x = 0.0, y = 0.0;
        double value = 0.0;
        int evaluations = 0;
        bool on_boundary = false; // result touches the search box
        bool kept_start = false;  // refinement did not beat the starting point
    };

    struct AlternatingSearch
    {
        int rounds = 3;
        int iterations = 40;
        double x_tol = 1e-6;
        double y_tol = 1e-6;
    };

    // Coordinate-wise golden-section maximization of f(x, y) on a box, starting from (x0, y0).
    // Never returns a point worse than the start.
    template <typename Fn>
    PlaneMaximum alternating_golden_section(Fn &&f, double x0, double y0, double x_lo, double x_hi, double y_lo, double y_hi,
                                            const AlternatingSearch &opt = {})
    {
        PlaneMaximum r;
        const double start_value = f(x0, y0);
        r.evaluations = 1;
        double x = x0, y = y0, v = start_value;
        for (int round = 0; round < opt.rounds; ++round)
        {
            auto lx = golden_section_max([&](double t)
                                         { return f(t, y); }, x_lo, x_hi, opt.iterations, opt.x_tol);
            r.evaluations += lx.evaluations;
            if (lx.value >= v)
            {
                x = lx.x;
                v = lx.value;
            }
            auto ly = golden_section_max([&](double t)
                                         { return f(x, t); }, y_lo, y_hi, opt.iterations, opt.y_tol);
            r.evaluations += ly.evaluations;
            if (ly.value >= v)
            {
                y = ly.x;
                v = ly.value;
            }
        }
        if (v < start_value)
        {
            x = x0;
            y = y0;
            v = start_value;
            r.kept_start = true;
        }
        r.x = x;
        r.y = y;
        r.value = v;
        r.on_boundary = std::abs(x - x_lo) <= opt.x_tol || std::abs(x - x_hi) <= opt.x_tol ||
                        std::abs(y - y_lo) <= opt.y_tol || std::abs(y - y_hi) <= opt.y_tol;
        return r;
    }

} // namespace thz

#endif
