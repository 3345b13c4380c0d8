#pragma once

// Spike traces shared by the hardware model, the reference simulator and the
// analysis code. A spike fired while integrating step t is stamped at the end
// of that step, (t + 1) * dt.

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ensim/network.hpp"

namespace ensim {

// Failure to read or write an artifact file.
class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct SpikeEvent
{
    std::uint32_t step{0};
    std::uint32_t population{0};
    std::uint32_t index{0}; // within the population
    auto operator<=>(const SpikeEvent &) const = default;
};

struct SpikeTrace
{
    double dt_ms{0.1};
    double duration_ms{0.0};
    double discard_ms{0.0};
    std::vector<std::string> populations;
    std::vector<std::uint32_t> population_sizes;
    std::vector<SpikeEvent> events;

    [[nodiscard]] double time_ms(const SpikeEvent &e) const
    {
        return (e.step + 1) * dt_ms;
    }
    [[nodiscard]] std::uint32_t steps() const;
    void sort();
    bool operator==(const SpikeTrace &) const = default;
};

SpikeTrace empty_trace(const NetworkModel &net, std::uint32_t steps);

// "time_ms population neuron_index" lines after a '#' metadata header.
std::string serialize_trace(const SpikeTrace &trace);
SpikeTrace parse_trace(std::string_view text);
void write_trace(const SpikeTrace &trace, const std::string &path);
SpikeTrace read_trace(const std::string &path);

} // namespace ensim
