#pragma once

// Per-board oscillator drift, the beacon drift-correction protocol and
// start-signal phase alignment. Time is tracked per chip as raw oscillator
// cycles; a timer edge fires after every `nominal + correction` cycles.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ensim/hardware.hpp"
#include "ensim/runtime.hpp"

namespace ensim {

struct ClockSyncConfig
{
    double beacon_interval_s{2.0};
    bool corrections{true};
    bool phase_align{true};
    bool record_diagnostics{true};
};

// Uniform per-board drifts in [-spread, +spread] ppm.
std::vector<double> sample_board_drift(const MachineSpec &m, double spread_ppm,
        std::uint64_t seed);

// Start-signal transit from chip (0,0), in ns, indexed y * width + x.
std::vector<double> start_signal_transit_ns(const MachineSpec &m);

// Per-chip wait after the start signal arrives so every chip's first timer
// event coincides: slowest arrival minus own arrival.
std::vector<double> phase_align(const MachineSpec &m);

// Slave-side correction for one beacon, in cycles per timer period.
// `elapsed_cycles` is the slave's raw count between two beacon arrivals,
// `periods` the master timer periods between the beacons, `phase_error` how
// many cycles late the slave's edge fell relative to the master's.
double beacon_correction(double elapsed_cycles, double nominal_cycles,
        double periods, double phase_error_cycles);

struct SyncDiagnostic
{
    std::uint32_t round{0};
    ChipCoord chip;
    double correction_cycles{0.0}; // per period, applied until the next beacon
    double residual_ns{0.0};       // edge time minus the master's edge time
};

class ClockSync
{
public:
    ClockSync(const MachineSpec &m, std::vector<double> board_drift_ppm,
            const CostModel &costs, double slowdown, ClockSyncConfig config);

    // Moves every chip to its next timer edge, handling beacons.
    void advance_period();
    // Jumps one whole beacon interval; edge times inside the interval are
    // linear up to one cycle of rounding.
    void advance_round();

    [[nodiscard]] std::uint64_t edge() const { return edge_; }
    [[nodiscard]] std::uint64_t periods_per_round() const { return periods_per_round_; }
    // Global time of chip `i`'s current edge, us, with the first edges at 0.
    [[nodiscard]] double edge_time_us(std::size_t i) const;
    [[nodiscard]] double skew_us() const;
    [[nodiscard]] std::size_t chips() const { return chips_.size(); }
    [[nodiscard]] double cycle_us() const { return 1.0 / nominal_cycles_per_us_; }
    [[nodiscard]] ChipCoord chip(std::size_t i) const { return chips_[i].coord; }
    [[nodiscard]] const std::vector<SyncDiagnostic> &diagnostics() const
    {
        return diagnostics_;
    }

private:
    struct Chip
    {
        ChipCoord coord;
        double cycles_per_us{0.0};
        double transit_us{0.0};
        double start_us{0.0};
        std::int64_t edge_cycles{0}; // raw cycles from first edge to current
        double accumulator{0.0};
        double correction{0.0};      // cycles per period
        double last_arrival_cycles{0.0};
    };

    void beacon();
    [[nodiscard]] double raw_cycles_at(const Chip &c, double time_us) const;

    MachineSpec machine_;
    ClockSyncConfig config_;
    double nominal_cycles_;
    double nominal_cycles_per_us_;
    std::uint64_t periods_per_round_;
    double origin_us_{0.0};
    std::size_t master_{0};
    std::vector<Chip> chips_;
    std::uint64_t edge_{0};
    std::uint32_t round_{0};
    std::vector<SyncDiagnostic> diagnostics_;
};

struct SkewReport
{
    double max_skew_us{0.0};           // after the settling rounds
    double max_skew_all_us{0.0};       // whole run
    double first_over_5us_s{-1.0};     // first edge time with skew > 5 us
    std::uint64_t periods{0};
};

// Runs `seconds` of wall-clock time period by period.
SkewReport simulate_sync(ClockSync &sync, double seconds,
        std::uint32_t settle_rounds = 3);
// Runs `seconds` one beacon interval at a time (fast enough for hours).
SkewReport simulate_sync_rounds(ClockSync &sync, double seconds,
        std::uint32_t settle_rounds = 3);

// Edge times for the given chips and steps, for the machine stepper.
TimerSchedule tabulated_schedule(ClockSync &sync,
        std::span<const ChipCoord> chips, std::uint32_t steps);

std::string serialize_sync_diagnostics(std::span<const SyncDiagnostic> d);

} // namespace ensim
