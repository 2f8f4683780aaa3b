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

#ifndef THZISAC_HARNESS_PARALLEL_HPP
#define THZISAC_HARNESS_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace thz::harness
{
    // Runs fn(i) for i in [0, count) on up to `threads` workers and returns the results in index
    // order. Each call must only touch its own inputs, so the output never depends on scheduling.
    // The exception of the lowest failing index is rethrown.
    template <typename Result, typename Fn>
    std::vector<Result> parallel_map(int count, int threads, Fn &&fn)
    {
        std::vector<Result> out(static_cast<std::size_t>(std::max(count, 0)));
        std::vector<std::exception_ptr> errors(out.size());
        std::atomic<int> next{0};
        auto worker = [&]
        {
            for (int i = next++; i < count; i = next++)
            {
                try
                {
                    out[std::size_t(i)] = fn(i);
                }
                catch (...)
                {
                    errors[std::size_t(i)] = std::current_exception();
                }
            }
        };
        const int n = std::clamp(threads, 1, std::max(count, 1));
        if (n == 1)
            worker();
        else
        {
            std::vector<std::jthread> pool;
            for (int t = 0; t < n; ++t)
                pool.emplace_back(worker);
        }
        for (auto &e : errors)
            if (e)
                std::rethrow_exception(e);
        return out;
    }

} // namespace thz::harness

#endif
