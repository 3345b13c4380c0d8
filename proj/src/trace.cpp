#include "ensim/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace ensim {

namespace {

// Digits after the decimal point needed to print multiples of dt exactly.
int time_decimals(double dt_ms)
{
    for (int d = 0; d < 9; ++d)
    {
        const double scaled = dt_ms * std::pow(10.0, d);
        if (std::abs(scaled - std::round(scaled)) < 1e-9 * std::max(1.0, scaled))
        {
            return d;
        }
    }
    return 9;
}

} // namespace

std::uint32_t SpikeTrace::steps() const
{
    return static_cast<std::uint32_t>(std::llround(duration_ms / dt_ms));
}

void SpikeTrace::sort()
{
    std::sort(events.begin(), events.end());
}

SpikeTrace empty_trace(const NetworkModel &net, std::uint32_t steps)
{
    SpikeTrace t;
    t.dt_ms = net.dt_ms;
    t.duration_ms = steps * net.dt_ms;
    for (const auto &p : net.populations)
    {
        t.populations.push_back(p.name);
        t.population_sizes.push_back(p.size);
    }
    return t;
}

std::string serialize_trace(const SpikeTrace &trace)
{
    const int decimals = time_decimals(trace.dt_ms);
    std::string out;
    out += fmt::format("# dt_ms {}\n# duration_ms {}\n# discard_ms {}\n",
            trace.dt_ms, trace.duration_ms, trace.discard_ms);
    for (std::size_t i = 0; i < trace.populations.size(); ++i)
    {
        out += fmt::format("# population {} {}\n", trace.populations[i],
                trace.population_sizes[i]);
    }
    out += "# time_ms population neuron_index\n";
    for (const auto &e : trace.events)
    {
        out += fmt::format("{:.{}f} {} {}\n", trace.time_ms(e), decimals,
                trace.populations.at(e.population), e.index);
    }
    return out;
}

SpikeTrace parse_trace(std::string_view text)
{
    SpikeTrace t;
    std::map<std::string, std::uint32_t, std::less<>> ids;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool have_dt = false;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
        {
            continue;
        }
        std::istringstream fields(line);
        if (line[0] == '#')
        {
            std::string hash, key;
            fields >> hash >> key;
            if (key == "dt_ms")
            {
                fields >> t.dt_ms;
                have_dt = true;
            }
            else if (key == "duration_ms")
                fields >> t.duration_ms;
            else if (key == "discard_ms")
                fields >> t.discard_ms;
            else if (key == "population")
            {
                std::string name;
                std::uint32_t size = 0;
                fields >> name >> size;
                ids.emplace(name, static_cast<std::uint32_t>(t.populations.size()));
                t.populations.push_back(name);
                t.population_sizes.push_back(size);
            }
            continue;
        }
        if (!have_dt)
        {
            throw SpecError("spike trace has no '# dt_ms' header");
        }
        double time = 0.0;
        std::string pop;
        std::uint32_t index = 0;
        if (!(fields >> time >> pop >> index))
        {
            throw SpecError(fmt::format("trace line {}: expected 'time "
                                        "population index'",
                    line_no));
        }
        const auto it = ids.find(pop);
        if (it == ids.end())
        {
            throw SpecError(fmt::format("trace line {}: unknown population "
                                        "'{}'",
                    line_no, pop));
        }
        const long long step = std::llround(time / t.dt_ms) - 1;
        if (step < 0 || index >= t.population_sizes[it->second])
        {
            throw SpecError(fmt::format("trace line {}: spike outside the "
                                        "recorded range",
                    line_no));
        }
        t.events.push_back({static_cast<std::uint32_t>(step), it->second, index});
    }
    return t;
}

void write_trace(const SpikeTrace &trace, const std::string &path)
{
    std::ofstream out(path, std::ios::binary);
    out << serialize_trace(trace);
    if (!out)
    {
        throw IoError(fmt::format("cannot write '{}'", path));
    }
}

SpikeTrace read_trace(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw IoError(fmt::format("cannot read '{}'", path));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str());
}

} // namespace ensim
