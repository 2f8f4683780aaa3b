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

#ifndef THZISAC_HARNESS_OUTPUT_HPP
#define THZISAC_HARNESS_OUTPUT_HPP

#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace thz::harness
{
    // Fixed textual form for numbers so identical runs give byte-identical files
    inline std::string fmt(double v)
    {
        if (std::isnan(v))
            return "nan";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return buf;
    }
    inline std::string fmt(int v) { return std::to_string(v); }
    inline std::string fmt(long v) { return std::to_string(v); }
    inline std::string fmt(std::size_t v) { return std::to_string(v); }
    inline std::string fmt(bool v) { return v ? "1" : "0"; }
    inline std::string fmt(const std::string &v) { return v; }
    inline std::string fmt(const char *v) { return v; }

    class CsvTable
    {
    public:
        CsvTable() = default;
        explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

        template <typename... Ts>
        void add(const Ts &...values)
        {
            if (sizeof...(Ts) != header_.size())
                throw std::logic_error("CsvTable: row width differs from header");
            rows_.push_back({fmt(values)...});
        }

        const std::vector<std::string> &header() const { return header_; }
        const std::vector<std::vector<std::string>> &rows() const { return rows_; }
        std::size_t size() const { return rows_.size(); }

        // "# config_hash=... seed=..." comment line, header row, data rows
        std::string render(const std::string &config_hash, std::uint64_t seed) const
        {
            std::string s = "# config_hash=" + config_hash + " seed=" + std::to_string(seed) + "\n";
            s += join(header_);
            for (const auto &r : rows_)
                s += join(r);
            return s;
        }

    private:
        static std::string join(const std::vector<std::string> &cells)
        {
            std::string s;
            for (std::size_t i = 0; i < cells.size(); ++i)
                s += (i ? "," : "") + cells[i];
            return s + "\n";
        }
        std::vector<std::string> header_;
        std::vector<std::vector<std::string>> rows_;
    };

    struct ExperimentOutput
    {
        std::vector<std::pair<std::string, CsvTable>> tables; // file stem -> table
        json summary = json::object();
    };

    inline void write_text(const std::filesystem::path &p, const std::string &text)
    {
        std::ofstream out(p, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write '" + p.string() + "'");
        out << text;
    }

    // Writes <stem>.csv for every table and <experiment>_summary.json
    inline std::vector<std::filesystem::path> write_output(const ExperimentOutput &o, const ExperimentConfig &cfg, const std::filesystem::path &dir)
    {
        std::filesystem::create_directories(dir);
        std::vector<std::filesystem::path> written;
        for (const auto &[stem, table] : o.tables)
        {
            const auto p = dir / (stem + ".csv");
            write_text(p, table.render(cfg.hash(), cfg.seed));
            written.push_back(p);
        }
        json summary = o.summary;
        summary["experiment"] = cfg.experiment;
        summary["config_hash"] = cfg.hash();
        summary["seed"] = cfg.seed;
        summary["config"] = cfg.resolved;
        std::string stem = cfg.experiment;
        for (auto &ch : stem)
            if (ch == '-')
                ch = '_';
        const auto p = dir / (stem + "_summary.json");
        write_text(p, summary.dump(2) + "\n");
        written.push_back(p);
        return written;
    }

} // namespace thz::harness

#endif
