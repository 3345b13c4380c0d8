#include "ensim/clock.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <fmt/format.h>

namespace ensim {

std::vector<double> sample_board_drift(const MachineSpec &m, double spread_ppm,
        std::uint64_t seed)
{
    if (!(spread_ppm >= 0.0) || spread_ppm > m.drift_bound_ppm)
    {
        throw SpecError(fmt::format("drift spread {} ppm outside [0, {}]",
                spread_ppm, m.drift_bound_ppm));
    }
    RandomStream rng(seed, 0xD21F7ULL);
    std::vector<double> out;
    for (int b = 0; b < m.boards(); ++b)
    {
        out.push_back(spread_ppm * (2.0 * rng.uniform() - 1.0));
    }
    return out;
}

std::vector<double> start_signal_transit_ns(const MachineSpec &m)
{
    const auto tree = shortest_path_tree(m, {0, 0});
    std::vector<double> out;
    out.reserve(tree.cost.size());
    for (const auto &c : tree.cost)
    {
        out.push_back(c.latency_ns(m));
    }
    return out;
}

std::vector<double> phase_align(const MachineSpec &m)
{
    auto transit = start_signal_transit_ns(m);
    const double slowest = *std::max_element(transit.begin(), transit.end());
    for (double &t : transit)
    {
        t = slowest - t;
    }
    return transit;
}

double beacon_correction(double elapsed_cycles, double nominal_cycles,
        double periods, double phase_error_cycles)
{
    // Rate: cycles this slave counts per master period. Phase: slewed out
    // evenly over the next interval.
    return (elapsed_cycles / periods - nominal_cycles) -
            phase_error_cycles / periods;
}

ClockSync::ClockSync(const MachineSpec &m, std::vector<double> board_drift_ppm,
        const CostModel &costs, double slowdown, ClockSyncConfig config)
        : machine_(m)
        , config_(config)
{
    m.validate();
    if (board_drift_ppm.size() != static_cast<std::size_t>(m.boards()))
    {
        throw SpecError(fmt::format("{} board drifts given for {} boards",
                board_drift_ppm.size(), m.boards()));
    }
    for (const double d : board_drift_ppm)
    {
        if (!(std::abs(d) <= m.drift_bound_ppm))
        {
            throw SpecError(fmt::format("board drift {} ppm beyond the {} ppm "
                                        "bound",
                    d, m.drift_bound_ppm));
        }
    }
    nominal_cycles_ = std::round(costs.cycles_per_period() * slowdown);
    nominal_cycles_per_us_ = costs.clock_hz * 1e-6;
    const double period_us = nominal_cycles_ / nominal_cycles_per_us_;
    periods_per_round_ = std::max<std::uint64_t>(1,
            static_cast<std::uint64_t>(std::llround(
                    config.beacon_interval_s * 1e6 / period_us)));

    const auto transit = start_signal_transit_ns(m);
    const auto delay = phase_align(m);
    for (int y = 0; y < m.height; ++y)
    {
        for (int x = 0; x < m.width; ++x)
        {
            const std::size_t i = static_cast<std::size_t>(y * m.width + x);
            Chip c;
            c.coord = {x, y};
            const double drift = board_drift_ppm[static_cast<std::size_t>(
                    m.board_of(c.coord))];
            c.cycles_per_us = nominal_cycles_per_us_ * (1.0 + drift * 1e-6);
            c.transit_us = transit[i] * 1e-3;
            // The wait is counted on the chip's own oscillator.
            const double wait_us = config.phase_align ? delay[i] * 1e-3 : 0.0;
            c.start_us = c.transit_us + wait_us * nominal_cycles_per_us_ / c.cycles_per_us;
            c.last_arrival_cycles = c.transit_us * nominal_cycles_per_us_;
            chips_.push_back(c);
        }
    }
    origin_us_ = 0.0;
    for (const auto &c : chips_)
    {
        origin_us_ = std::max(origin_us_, c.start_us);
    }
    master_ = 0;
}

double ClockSync::raw_cycles_at(const Chip &c, double time_us) const
{
    return std::floor((time_us - c.start_us) * c.cycles_per_us);
}

double ClockSync::edge_time_us(std::size_t i) const
{
    const Chip &c = chips_[i];
    return c.start_us + static_cast<double>(c.edge_cycles) / c.cycles_per_us -
            origin_us_;
}

double ClockSync::skew_us() const
{
    double lo = edge_time_us(0);
    double hi = lo;
    for (std::size_t i = 1; i < chips_.size(); ++i)
    {
        const double t = edge_time_us(i);
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    return hi - lo;
}

void ClockSync::advance_period()
{
    const auto nominal = static_cast<std::int64_t>(nominal_cycles_);
    for (std::size_t i = 0; i < chips_.size(); ++i)
    {
        Chip &c = chips_[i];
        std::int64_t applied = 0;
        if (config_.corrections && i != master_)
        {
            // Fractions of a cycle wait in the accumulator until whole.
            c.accumulator += c.correction;
            applied = static_cast<std::int64_t>(std::trunc(c.accumulator));
            c.accumulator -= static_cast<double>(applied);
        }
        c.edge_cycles += nominal + applied;
    }
    ++edge_;
    if (edge_ % periods_per_round_ == 0)
    {
        beacon();
    }
}

void ClockSync::advance_round()
{
    if (edge_ % periods_per_round_ != 0)
    {
        throw std::logic_error("advance_round() called mid-interval");
    }
    const auto p = static_cast<double>(periods_per_round_);
    const auto nominal = static_cast<std::int64_t>(nominal_cycles_);
    for (std::size_t i = 0; i < chips_.size(); ++i)
    {
        Chip &c = chips_[i];
        std::int64_t applied = 0;
        if (config_.corrections && i != master_)
        {
            const double total = c.accumulator + p * c.correction;
            applied = static_cast<std::int64_t>(std::trunc(total));
            c.accumulator = total - static_cast<double>(applied);
        }
        c.edge_cycles += nominal * static_cast<std::int64_t>(periods_per_round_) + applied;
    }
    edge_ += periods_per_round_;
    beacon();
}

void ClockSync::beacon()
{
    ++round_;
    const double send_us = edge_time_us(master_) + origin_us_;
    const double master_edge = edge_time_us(master_);
    for (std::size_t i = 0; i < chips_.size(); ++i)
    {
        Chip &c = chips_[i];
        if (i != master_)
        {
            const double arrival = raw_cycles_at(c, send_us + c.transit_us);
            // Transit is known from boot, so the slave can place the master's
            // edge precisely in its own cycle count.
            const double master_edge_cycles =
                    arrival - c.transit_us * nominal_cycles_per_us_;
            const double phase_error =
                    static_cast<double>(c.edge_cycles) - master_edge_cycles;
            const double elapsed = arrival - c.last_arrival_cycles;
            c.last_arrival_cycles = arrival;
            c.correction = config_.corrections
                    ? beacon_correction(elapsed, nominal_cycles_,
                              static_cast<double>(periods_per_round_), phase_error)
                    : 0.0;
        }
        if (config_.record_diagnostics)
        {
            diagnostics_.push_back({round_, c.coord, c.correction,
                    (edge_time_us(i) - master_edge) * 1e3});
        }
    }
}

SkewReport simulate_sync(ClockSync &sync, double seconds,
        std::uint32_t settle_rounds)
{
    SkewReport r;
    const std::uint64_t settle = settle_rounds * sync.periods_per_round();
    while (true)
    {
        const double now_s = sync.edge_time_us(0) * 1e-6;
        if (now_s >= seconds)
        {
            break;
        }
        sync.advance_period();
        ++r.periods;
        const double s = sync.skew_us();
        r.max_skew_all_us = std::max(r.max_skew_all_us, s);
        if (sync.edge() > settle)
        {
            r.max_skew_us = std::max(r.max_skew_us, s);
        }
        if (s > 5.0 && r.first_over_5us_s < 0.0)
        {
            r.first_over_5us_s = sync.edge_time_us(0) * 1e-6;
        }
    }
    return r;
}

SkewReport simulate_sync_rounds(ClockSync &sync, double seconds,
        std::uint32_t settle_rounds)
{
    SkewReport r;
    const std::uint64_t settle = settle_rounds * sync.periods_per_round();
    // Between beacons every chip's edge times are linear in the edge index
    // up to accumulator rounding, so pairwise skew peaks at the interval
    // ends; two cycles cover the rounding of both chips.
    const double rounding_us = 2.0 * sync.cycle_us();
    while (sync.edge_time_us(0) * 1e-6 < seconds)
    {
        const double before = sync.skew_us();
        sync.advance_round();
        r.periods += sync.periods_per_round();
        const double s = std::max(before, sync.skew_us()) + rounding_us;
        r.max_skew_all_us = std::max(r.max_skew_all_us, s);
        if (sync.edge() > settle)
        {
            r.max_skew_us = std::max(r.max_skew_us, s);
        }
        if (s > 5.0 && r.first_over_5us_s < 0.0)
        {
            r.first_over_5us_s = sync.edge_time_us(0) * 1e-6;
        }
    }
    return r;
}

TimerSchedule tabulated_schedule(ClockSync &sync,
        std::span<const ChipCoord> chips, std::uint32_t steps)
{
    auto table = std::make_shared<std::map<ChipCoord, std::vector<double>>>();
    std::vector<std::pair<std::size_t, std::vector<double> *>> wanted;
    for (const ChipCoord c : chips)
    {
        auto &v = (*table)[c];
        v.reserve(steps);
        for (std::size_t i = 0; i < sync.chips(); ++i)
        {
            if (sync.chip(i) == c)
            {
                wanted.emplace_back(i, &v);
            }
        }
    }
    for (std::uint32_t s = 0; s < steps; ++s)
    {
        for (auto &[i, v] : wanted)
        {
            v->push_back(sync.edge_time_us(i));
        }
        sync.advance_period();
    }
    return [table](ChipCoord chip, std::uint32_t step) {
        const auto it = table->find(chip);
        if (it == table->end() || step >= it->second.size())
        {
            throw SchedulingError(fmt::format(
                    "no timer edge tabulated for chip ({},{}) step {}", chip.x,
                    chip.y, step));
        }
        return it->second[step];
    };
}

std::string serialize_sync_diagnostics(std::span<const SyncDiagnostic> d)
{
    std::string out = "# round x y correction_cycles residual_skew_ns\n";
    for (const auto &r : d)
    {
        out += fmt::format("{} {} {} {:.6f} {:.3f}\n", r.round, r.chip.x,
                r.chip.y, r.correction_cycles, r.residual_ns);
    }
    return out;
}

} // namespace ensim
