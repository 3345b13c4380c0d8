#pragma once

// Post-processing of spike traces and profiles: per-timestep load curves,
// firing statistics, flush accounting and energy per synaptic event.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ensim/network.hpp"
#include "ensim/runtime.hpp"
#include "ensim/trace.hpp"

namespace ensim {

struct TimestepCount
{
    std::uint32_t step{0};
    std::uint32_t total{0};
    std::uint32_t excitatory{0};
    std::uint32_t inhibitory{0};
    bool operator==(const TimestepCount &) const = default;
};

std::vector<TimestepCount> per_timestep_counts(const SpikeTrace &trace,
        std::span<const Polarity> polarity);

struct Histogram
{
    double low{0.0};
    double bin_width{0.0};
    std::vector<std::uint32_t> counts;
};

// Bin width 2 * IQR * n^(-1/3); a single bin when the spread is zero.
Histogram freedman_diaconis(std::span<const double> values);

// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

struct FiringStatsOptions
{
    double discard_ms{0.0};
    double correlation_bin_ms{2.0};
    std::uint32_t correlation_sample{200};
    std::uint64_t seed{1};
};

struct PopulationStats
{
    std::string name;
    std::vector<double> rates_hz;        // every neuron
    std::vector<double> cv_isi;          // neurons with >= 2 ISIs
    std::uint32_t cv_excluded{0};        // neurons with < 2 ISIs
    std::vector<std::uint32_t> sample;   // neurons used for correlations
    std::vector<double> correlations;    // sampled pairs with nonzero variance
    std::uint32_t correlation_excluded{0};
    double mean_rate_hz{0.0};
    double mean_cv{0.0};
    double mean_correlation{0.0};
    Histogram rate_histogram;
    Histogram cv_histogram;
    Histogram correlation_histogram;
};

struct FiringStats
{
    FiringStatsOptions options;
    double active_ms{0.0};
    std::vector<PopulationStats> populations;
};

// CV of inter-spike intervals (population form, no Bessel correction) from
// spike steps of one neuron; NaN for fewer than two intervals.
double cv_isi(std::span<const std::uint32_t> spike_steps);
// Pearson coefficient of two equally long count vectors; NaN if either is
// constant.
double pearson(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

FiringStats firing_stats(const SpikeTrace &trace,
        const FiringStatsOptions &options);
std::string firing_stats_json(const FiringStats &stats);

struct FlushReport
{
    std::uint64_t received{0};
    std::uint64_t processed{0};
    std::uint64_t flushed{0};
    std::uint64_t events_processed{0};
    std::uint64_t events_flushed{0};
    std::uint64_t cross_timestep{0};
    std::uint32_t max_flushed_in_step{0};
    double loss_fraction{0.0};
};

FlushReport flush_report(std::span<const ProfileRecord> profiles);

struct EnergyFigures
{
    std::string label;
    double wall_clock_s{0.0};
    double total_energy_kwh{0.0};
    double synaptic_events{0.0}; // 0 when not measured
};

// Energy per synaptic event in microjoules.
double energy_per_event_uj(const EnergyFigures &figures);
// Energy of a run of `to_s` at the constant power of one lasting `from_s`.
double scale_energy_kwh(double kwh, double from_s, double to_s);

// Whitespace table: label wall_clock_s total_kwh synaptic_events ('-' if
// none); '#' comments.
std::vector<EnergyFigures> parse_energy_table(std::string_view text);
std::vector<EnergyFigures> load_energy_table(const std::string &path);

} // namespace ensim
