// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ensim/analysis.hpp"
#include "ensim/clock.hpp"
#include "ensim/hardware.hpp"
#include "ensim/kinetics.hpp"
#include "ensim/network.hpp"
#include "ensim/oracle.hpp"
#include "ensim/runtime.hpp"
#include "ensim/trace.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "stats_reference.hpp"

using namespace ensim;

namespace {

struct Outcome
{
    bool pass{false};
    std::string detail;
};

NetworkModel desk_network(std::uint64_t seed)
{
    NetworkSpec spec = scale_network(testing::benchmark_spec(), 0.02);
    spec.simulation.input = InputVariant::poisson;
    return build_network(spec, seed);
}

Outcome oracle_equivalence()
{
    const auto start = std::chrono::steady_clock::now();
    const NetworkModel net = desk_network(1);
    const std::uint32_t steps = 10000;
    RuntimeOptions opt;
    opt.slowdown = 1e6;
    opt.seed_poisson = 1;
    const HardwareRun hw = run_hardware(net, MachineSpec{}, CostModel{}, opt, steps);
    const SpikeTrace oracle = oracle_simulate(net, steps, {1, true});
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool identical = serialize_trace(hw.trace) == serialize_trace(oracle);
    return {identical && hw.summary.flushed == 0 && seconds < 120.0,
            fmt::format("{} neurons, {} spikes, traces {}, flushed {}, {:.1f} s",
                    net.neuron_count(), hw.trace.events.size(),
                    identical ? "identical" : "differ", hw.summary.flushed, seconds)};
}

Outcome conservation()
{
    RandomStream rng(2024);
    const double slowdowns[] = {1.0, 1.0, 1.5, 2.0, 4.0};
    std::uint64_t records = 0, violations = 0, flushed = 0;
    const MachineSpec machine;
    for (int r = 0; r < 10; ++r)
    {
        const NetworkModel net = desk_network(rng() % 1000 + 1);
        RuntimeOptions opt;
        opt.slowdown = slowdowns[rng() % 5];
        opt.seed_poisson = rng() % 1000 + 1;
        const std::uint32_t steps = 1000;
        const Mapping mapping = map_network(net, machine);
        ClockSync sync(machine, sample_board_drift(machine, 50.0, rng()), CostModel{},
                opt.slowdown, ClockSyncConfig{2.0, true, true, false});
        opt.schedule = tabulated_schedule(sync, mapping.placement.chips, steps);
        const HardwareRun hw = run_hardware(net, machine, CostModel{}, opt, steps);
        for (const auto &p : hw.profiles)
        {
            ++records;
            if (p.received != p.processed + p.flushed)
                ++violations;
        }
        if (hw.summary.received != hw.summary.processed + hw.summary.flushed)
            ++violations;
        flushed += hw.summary.flushed;
    }
    return {violations == 0 && records > 0,
            fmt::format("{} records over 10 runs, {} violations, {} flushed in total",
                    records, violations, flushed)};
}

SynapticMatrix single_target_matrix()
{
    SynapticMatrix m;
    m.table.entries.push_back({0, kRouteKeyMask, 0, 2, WeightScale{0}});
    m.words.assign(std::size_t{kMaxNeuronsPerCore} * 2, 0);
    for (std::uint32_t n = 0; n < kMaxNeuronsPerCore; ++n)
    {
        m.words[n * 2] = 1;
        m.words[n * 2 + 1] = SynapticWord{100, 1, 0, static_cast<std::uint8_t>(n % 64)}.encode();
    }
    return m;
}

Outcome capacity()
{
    const CostModel costs;
    SynapseCore core({{0, 0}, 3}, CoreRole::synapse_exc_lower, single_target_matrix(),
            kMaxNeuronsPerCore, costs, 1.0);
    std::uint32_t lo = std::numeric_limits<std::uint32_t>::max(), hi = 0;
    for (std::uint32_t step = 0; step < 50; ++step)
    {
        const double open = step * 100.0;
        std::vector<Packet> arrivals;
        for (std::uint32_t i = 0; i < 200; ++i)
            arrivals.push_back({open + 0.5 * i, i % kMaxNeuronsPerCore, step});
        const auto r = synapse_core_run_window(core, arrivals, step, open);
        lo = std::min<std::uint32_t>(lo, r.processed);
        hi = std::max<std::uint32_t>(hi, r.processed);
    }
    return {lo >= 25 && hi <= 27,
            fmt::format("processed per timestep in [{}, {}] over 50 saturated steps", lo, hi)};
}

Outcome clock_sync()
{
    const MachineSpec m;
    const CostModel costs;
    double worst = 0.0;
    for (const std::uint64_t seed : {1u, 2u, 3u})
    {
        ClockSync sync(m, sample_board_drift(m, 50.0, seed), costs, 1.0,
                ClockSyncConfig{2.0, true, true, false});
        worst = std::max(worst, simulate_sync(sync, 60.0).max_skew_us);
    }
    std::vector<double> drift(12, 0.0);
    drift[7] = 50.0;
    ClockSync off(m, drift, costs, 1.0, ClockSyncConfig{2.0, false, true, false});
    const SkewReport free = simulate_sync(off, 1.0);
    const bool pass = worst < 5.0 && free.first_over_5us_s > 0.0 && free.first_over_5us_s < 1.0;
    return {pass, fmt::format("synchronised max skew {:.3f} us over 60 s; unsynchronised "
                              "exceeds 5 us at {:.4f} s",
                          worst, free.first_over_5us_s)};
}

Outcome energy()
{
    const auto table = load_energy_table(testing::data_path("energy_table.txt"));
    const auto row = [&](const std::string &label) {
        return *std::find_if(table.begin(), table.end(),
                [&](const EnergyFigures &f) { return f.label == label; });
    };
    const auto milli = [](double v) { return std::llround(v * 1000.0); };
    const double dc = energy_per_event_uj(row("microcircuit_dc_10s"));
    const double poisson = energy_per_event_uj(row("microcircuit_poisson_10s"));
    const double scaled = scale_energy_kwh(row("microcircuit_dc_12h").total_energy_kwh, 43200.0, 10.0);
    const bool dc_ok = milli(dc) == 601;
    const bool poisson_ok = milli(poisson) == 628;
    const bool scaled_ok = std::llround(scaled * 1e6) == 1525;
    return {dc_ok && poisson_ok && scaled_ok,
            fmt::format("dc {:.3f} uJ (want 0.601, {}); poisson {:.3f} uJ (want 0.628, {}); "
                        "6.59 kWh/12 h -> {:.6f} kWh/10 s ({})",
                    dc, dc_ok ? "ok" : "off", poisson, poisson_ok ? "ok" : "off", scaled,
                    scaled_ok ? "ok" : "off")};
}

Outcome lif_fidelity()
{
    RandomStream rng(77);
    const auto in = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    double worst = 0.0;
    for (int draw = 0; draw < 10000; ++draw)
    {
        NeuronParams p;
        p.tau_m_ms = in(5.0, 30.0);
        p.tau_syn_ms = draw % 100 == 0 ? p.tau_m_ms : in(0.2, 5.0);
        p.e_rest_mv = in(-75.0, -55.0);
        p.r_mohm = in(10.0, 100.0);
        p.v_reset_mv = p.e_rest_mv;
        p.v_thresh_mv = std::numeric_limits<double>::max();
        p.t_ref_ms = 2.0;
        p.i_dc_pa = in(0.0, 300.0);
        const LifPropagator prop(p, 0.1);
        NeuronState s{in(-80.0, -50.0), in(-500.0, 500.0), 0};
        const double input = in(-1000.0, 1000.0);
        const auto got = prop.step(s, input);
        const auto want = testing::fine_step(p, {s.v_mv, s.i_syn_pa}, input, 0.1);
        worst = std::max(worst, std::abs(got.state.v_mv - want.v_mv));
    }

    // Reset and clamp on the benchmark parameters.
    const NeuronParams p = testing::benchmark_spec().neuron_model("lif");
    const LifPropagator prop(p, 0.1);
    auto r = prop.step({p.v_thresh_mv - 0.01, 2000.0, 0}, 0.0);
    bool clamp = r.spiked && r.state.v_mv == p.v_reset_mv &&
            r.state.ref_remaining == std::llround(p.t_ref_ms / 0.1);
    const int ref = r.state.ref_remaining;
    for (int k = 0; k < ref; ++k)
    {
        r = prop.step(r.state, 20000.0);
        clamp = clamp && !r.spiked && r.state.v_mv == p.v_reset_mv;
    }
    clamp = clamp && prop.step(r.state, 20000.0).spiked;
    return {worst <= 1e-6 && clamp,
            fmt::format("max |dV| {:.2e} mV over 10^4 draws; reset/clamp {}", worst,
                    clamp ? "held" : "violated")};
}

Outcome routing_soundness()
{
    for (std::uint32_t sub = 0; sub < kMaxSubpops; ++sub)
    {
        for (std::uint32_t n = 0; n < kMaxNeuronsPerCore; ++n)
        {
            const PacketKey k{n, sub, 0x0F0Fu};
            if (!(PacketKey::decode(k.encode()) == k))
                return {false, fmt::format("key ({}, {}) does not round-trip", n, sub)};
        }
    }
    const MachineSpec m = testing::toy_machine();
    std::vector<PopulationShape> pops;
    const std::uint32_t sizes[] = {96, 40, 88, 32, 56, 24};
    for (std::size_t i = 0; i < 6; ++i)
    {
        pops.push_back({fmt::format("P{}", i), sizes[i],
                i % 2 == 0 ? Polarity::excitatory : Polarity::inhibitory, true});
    }
    const auto placement = place_radial(partition(pops, 10), m);
    const auto keys = allocate_keys(placement, pops);
    ConnectivitySummary conn;
    for (std::uint32_t s = 0; s < 6; ++s)
        for (std::uint32_t t = 0; t < 6; ++t)
            conn.projections.emplace_back(s, t);
    const auto tables = build_routing_tables(m, placement, keys, pops, conn);
    std::uint64_t packets = 0;
    for (std::size_t e = 0; e < placement.ensembles.size(); ++e)
    {
        auto want = destination_cores(placement, pops, conn, e);
        std::sort(want.begin(), want.end());
        for (std::uint32_t n = 0; n < placement.ensembles[e].neuron_count; ++n)
        {
            std::vector<CoreAddress> got;
            for (const auto &d : route_packet(m, tables, placement.placed[e].chip, keys.key_of(e, n)))
                got.push_back(d.core);
            std::sort(got.begin(), got.end());
            if (got != want)
                return {false, fmt::format("ensemble {} neuron {} misrouted", e, n)};
            ++packets;
        }
    }
    return {placement.chips.size() == 12,
            fmt::format("{} keys round-trip; {} packets on {} chips reach exactly their cores",
                    kMaxSubpops * kMaxNeuronsPerCore, packets, placement.chips.size())};
}

Outcome flush_monotone()
{
    const NetworkModel net = desk_network(1);
    std::vector<std::uint64_t> flushed;
    for (const double slowdown : {1.0, 2.0, 4.0, 20.0})
    {
        RuntimeOptions opt;
        opt.slowdown = slowdown;
        opt.keep_profiles = false;
        flushed.push_back(run_hardware(net, MachineSpec{}, CostModel{}, opt, 10000).summary.flushed);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < flushed.size(); ++i)
        monotone = monotone && flushed[i] <= flushed[i - 1];
    return {monotone, fmt::format("flushed at slow-down 1/2/4/20: {}/{}/{}/{}", flushed[0],
                              flushed[1], flushed[2], flushed[3])};
}

SpikeTrace synthetic_trace(std::uint64_t seed)
{
    SpikeTrace t;
    t.dt_ms = 0.1;
    t.duration_ms = 1000.0;
    t.populations = {"A", "B"};
    t.population_sizes = {10, 10};
    RandomStream rng(seed);
    for (std::uint32_t p = 0; p < 2; ++p)
        for (std::uint32_t n = 0; n < 10; ++n)
            for (std::uint32_t s = 0; s < t.steps(); ++s)
                if (rng.uniform() < 0.0004 * (n % 6) + 0.002 * p)
                    t.events.push_back({s, p, n});
    t.sort();
    return t;
}

bool same(const std::vector<double> &kept, std::uint32_t excluded, const std::vector<double> &brute)
{
    std::vector<double> finite;
    for (const double v : brute)
        if (!std::isnan(v))
            finite.push_back(v);
    return kept == finite && excluded == brute.size() - finite.size();
}

Outcome statistics()
{
    std::size_t compared = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
    {
        const SpikeTrace t = synthetic_trace(seed);
        FiringStatsOptions opt;
        opt.discard_ms = seed % 2 ? 0.0 : 100.0;
        opt.correlation_bin_ms = seed % 3 ? 2.0 : 5.0;
        const auto stats = firing_stats(t, opt);
        const auto brute = testing::brute_stats(serialize_trace(t), opt.discard_ms, opt.correlation_bin_ms);
        for (const auto &ps : stats.populations)
        {
            if (ps.rates_hz != brute.rates.at(ps.name) ||
                    !same(ps.cv_isi, ps.cv_excluded, brute.cvs.at(ps.name)) ||
                    !same(ps.correlations, ps.correlation_excluded, brute.correlations.at(ps.name)))
            {
                return {false, fmt::format("seed {} population {} differs from brute force", seed, ps.name)};
            }
            compared += ps.rates_hz.size();
        }
    }
    RandomStream rng(5);
    std::vector<std::uint32_t> ticks;
    double at = 0.0;
    for (int i = 0; i < 10000; ++i)
    {
        at += -std::log(1.0 - rng.uniform()) * 10000.0;
        ticks.push_back(static_cast<std::uint32_t>(at));
    }
    const double cv = cv_isi(ticks);
    return {cv >= 0.97 && cv <= 1.03,
            fmt::format("{} neurons match brute force exactly; Poisson CV {:.4f}", compared, cv)};
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
            {"1 oracle equivalence", oracle_equivalence},
            {"2 conservation", conservation},
            {"3 synapse core capacity", capacity},
            {"4 clock synchronisation", clock_sync},
            {"5 energy arithmetic", energy},
            {"6 LIF fidelity", lif_fidelity},
            {"7 routing soundness", routing_soundness},
            {"8 flush monotonicity", flush_monotone},
            {"9 statistics correctness", statistics},
    };
    int failed = 0;
    for (const auto &[name, check] : criteria)
    {
        Outcome o;
        try
        {
            o = check();
        }
        catch (const std::exception &e)
        {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        failed += o.pass ? 0 : 1;
        fmt::print("{} {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
