#pragma once

// Brute-force firing statistics straight from trace text: every quantity is
// recomputed per neuron by scanning all lines, using tick arithmetic on the
// printed times.

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace ensim::testing {

struct BruteStats
{
    std::map<std::string, std::vector<double>> rates;
    std::map<std::string, std::vector<double>> cvs;       // NaN kept
    std::map<std::string, std::vector<double>> correlations; // NaN kept, i < j order
};

inline BruteStats brute_stats(const std::string &text, double discard_ms, double bin_ms)
{
    double dt = 0.0, duration = 0.0;
    std::vector<std::pair<std::string, std::uint32_t>> pops;
    std::vector<std::tuple<std::int64_t, std::string, std::uint32_t>> spikes;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
    {
        std::istringstream f(line);
        if (line.rfind("# dt_ms", 0) == 0)
        {
            std::string h, k;
            f >> h >> k >> dt;
        }
        else if (line.rfind("# duration_ms", 0) == 0)
        {
            std::string h, k;
            f >> h >> k >> duration;
        }
        else if (line.rfind("# population", 0) == 0)
        {
            std::string h, k, name;
            std::uint32_t size = 0;
            f >> h >> k >> name >> size;
            pops.emplace_back(name, size);
        }
        else if (!line.empty() && line[0] != '#')
        {
            double t = 0.0;
            std::string pop;
            std::uint32_t idx = 0;
            f >> t >> pop >> idx;
            spikes.emplace_back(std::llround(t / dt), pop, idx);
        }
    }
    const std::int64_t total_ticks = std::llround(duration / dt);
    const std::int64_t discard_ticks = std::llround(discard_ms / dt);
    const std::int64_t bin_ticks = std::max<std::int64_t>(1, std::llround(bin_ms / dt));
    const std::int64_t bins = (total_ticks - discard_ticks) / bin_ticks;
    const double active_s = static_cast<double>(total_ticks - discard_ticks) * dt * 1e-3;

    BruteStats out;
    for (const auto &[name, size] : pops)
    {
        std::vector<std::vector<std::int64_t>> counts;
        for (std::uint32_t n = 0; n < size; ++n)
        {
            std::vector<std::int64_t> ticks;
            for (const auto &[tick, pop, idx] : spikes)
            {
                // a spike stamped at tick k belongs to step k - 1
                if (pop == name && idx == n && tick - 1 >= discard_ticks)
                    ticks.push_back(tick);
            }
            std::sort(ticks.begin(), ticks.end());
            out.rates[name].push_back(static_cast<double>(ticks.size()) / active_s);
            std::vector<std::int64_t> isi;
            for (std::size_t i = 1; i < ticks.size(); ++i)
                isi.push_back(ticks[i] - ticks[i - 1]);
            out.cvs[name].push_back(brute_cv(isi));
            std::vector<std::int64_t> c(static_cast<std::size_t>(std::max<std::int64_t>(bins, 0)), 0);
            for (const auto t : ticks)
            {
                const std::int64_t b = (t - 1 - discard_ticks) / bin_ticks;
                if (b < bins)
                    ++c[static_cast<std::size_t>(b)];
            }
            counts.push_back(std::move(c));
        }
        for (std::size_t i = 0; i < counts.size(); ++i)
            for (std::size_t j = i + 1; j < counts.size(); ++j)
                out.correlations[name].push_back(brute_pearson(counts[i], counts[j]));
    }
    return out;
}

} // namespace ensim::testing
