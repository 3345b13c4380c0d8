#include "ensim/run.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ensim/analysis.hpp"
#include "ensim/clock.hpp"
#include "ensim/hardware.hpp"
#include "ensim/oracle.hpp"
#include "ensim/runtime.hpp"
#include "ensim/trace.hpp"

namespace ensim {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(RunMode mode)
{
    switch (mode)
    {
    case RunMode::hardware: return "hardware";
    case RunMode::oracle: return "oracle";
    case RunMode::both: return "both";
    case RunMode::map: return "map";
    }
    return "?";
}

RunMode parse_run_mode(std::string_view text)
{
    for (const RunMode m : {RunMode::hardware, RunMode::oracle, RunMode::both,
                 RunMode::map})
    {
        if (text == to_string(m))
            return m;
    }
    throw SpecError(fmt::format("unknown mode '{}'", text));
}

void RunConfig::validate() const
{
    if (model_text.empty())
        throw SpecError("no model given");
    if (!(duration_ms > 0.0))
        throw SpecError(fmt::format("duration {} ms must be positive", duration_ms));
    if (!(slowdown >= 1.0))
        throw SpecError(fmt::format("slow-down multiplier {} below 1", slowdown));
    if (scale && !(*scale > 0.0 && *scale <= 1.0))
        throw SpecError(fmt::format("scale {} outside (0, 1]", *scale));
    if (drift_spread_ppm && !(*drift_spread_ppm >= 0.0))
        throw SpecError("drift spread must be non-negative");
    if (discard_ms < 0.0 || discard_ms >= duration_ms)
        throw SpecError("discard window must lie inside the run");
    if (!(correlation_bin_ms > 0.0))
        throw SpecError("correlation bin must be positive");
}

std::string read_text_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw IoError(fmt::format("cannot read '{}'", path));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string &path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out)
    {
        throw IoError(fmt::format("cannot write '{}'", path));
    }
}

int exit_code_for_current_exception(std::string &message)
{
    try
    {
        throw;
    }
    catch (const PlacementError &e)
    {
        message = e.what();
        return kExitPlacement;
    }
    catch (const KeyAllocationError &e)
    {
        message = e.what();
        return kExitKeys;
    }
    catch (const RoutingError &e)
    {
        message = e.what();
        return kExitRouting;
    }
    catch (const IoError &e)
    {
        message = e.what();
        return kExitIo;
    }
    catch (const SchedulingError &e)
    {
        message = e.what();
        return kExitScheduling;
    }
    catch (const SpecError &e)
    {
        message = e.what();
        return kExitSpec;
    }
    catch (const KineticsError &e)
    {
        message = e.what();
        return kExitSpec;
    }
    catch (const HardwareError &e)
    {
        message = e.what();
        return kExitSpec;
    }
    catch (const json::exception &e)
    {
        message = fmt::format("manifest: {}", e.what());
        return kExitSpec;
    }
    catch (const std::exception &e)
    {
        message = e.what();
        return kExitUsage;
    }
}

namespace {

MachineSpec machine_of(const RunConfig &c)
{
    if (c.machine_text.empty())
    {
        MachineSpec m;
        m.validate();
        return m;
    }
    return parse_machine_spec(c.machine_text);
}

CostModel costs_of(const RunConfig &c)
{
    CostModel costs = c.costs_text.empty() ? CostModel{} : parse_cost_model(c.costs_text);
    costs.validate();
    return costs;
}

NetworkSpec network_spec_of(const RunConfig &c)
{
    NetworkSpec spec = parse_network_spec(c.model_text);
    if (c.input)
        spec.simulation.input = *c.input;
    if (c.scale && *c.scale != 1.0)
        spec = scale_network(spec, *c.scale);
    spec.validate();
    return spec;
}

std::string timestep_table(const SpikeTrace &trace, const std::vector<Polarity> &polarity)
{
    std::string out = "# step time_ms total excitatory inhibitory\n";
    for (const auto &c : per_timestep_counts(trace, polarity))
    {
        out += fmt::format("{} {:.4f} {} {} {}\n", c.step, (c.step + 1) * trace.dt_ms,
                c.total, c.excitatory, c.inhibitory);
    }
    return out;
}

std::string placement_summary(const Mapping &m, const MachineSpec &machine)
{
    json doc;
    const auto roster = m.placement.roster();
    std::map<std::size_t, std::size_t> histogram;
    for (const auto &[chip, ens] : roster)
        histogram[ens.size()]++;
    json hist = json::object();
    for (const auto [n, chips] : histogram)
        hist[std::to_string(n)] = chips;
    doc["ensembles"] = m.placement.ensembles.size();
    doc["chips_used"] = m.placement.chips.size();
    doc["chips_available"] = machine.chip_count();
    doc["cores_used"] = m.placement.cores_used();
    doc["max_ensembles_per_chip"] = m.placement.max_ensembles_per_chip();
    doc["chips_by_ensemble_count"] = hist;
    doc["routing_entries_max"] = m.routing.max_entries();
    doc["routing_entries_total"] = m.routing.total_entries();
    doc["routing_entry_limit"] = machine.routing_entry_limit;
    return doc.dump(2) + "\n";
}

json summary_json(const RunSummary &s, const FlushReport &f)
{
    return {
            {"steps", s.steps},
            {"spikes", s.spikes},
            {"packets_sent", s.packets_sent},
            {"received", s.received},
            {"processed", s.processed},
            {"flushed", s.flushed},
            {"zero_target", s.zero_target},
            {"kickstarts", s.kickstarts},
            {"cross_timestep", s.cross_timestep},
            {"synaptic_events_processed", f.events_processed},
            {"synaptic_events_flushed", f.events_flushed},
            {"synaptic_event_loss_fraction", f.loss_fraction},
            {"poisson_saturations", s.poisson_saturations},
            {"max_flushed_in_step", s.max_flushed_in_step},
            {"max_received_in_step", s.max_received_in_step},
            {"max_neuron_busy_us", s.max_neuron_busy_us},
            {"max_synapse_busy_us", s.max_synapse_busy_us},
            {"chips", s.chips},
            {"cores", s.cores},
            {"routing_entries_max", s.routing_entries_max},
    };
}

// First line where two texts differ (1-based), 0 if identical.
std::size_t first_difference(std::string_view a, std::string_view b)
{
    std::size_t line = 1;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i)
    {
        if (a[i] != b[i])
            return line;
        if (a[i] == '\n')
            ++line;
    }
    return a.size() == b.size() ? 0 : line;
}

void execute(const RunConfig &config, RunReport &report)
{
    config.validate();
    const NetworkSpec spec = network_spec_of(config);
    const MachineSpec machine = machine_of(config);
    const CostModel costs = costs_of(config);
    const auto steps = static_cast<std::uint32_t>(std::llround(config.duration_ms / spec.simulation.dt_ms));
    if (steps == 0)
        throw SpecError("duration shorter than one timestep");

    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec)
    {
        throw IoError(fmt::format("cannot create '{}': {}", config.out_dir, ec.message()));
    }
    const auto path = [&](std::string_view name) {
        return (fs::path(config.out_dir) / name).string();
    };
    write_text_file(path("manifest.json"), manifest_json(config));

    const Mapping mapping = map_network(spec, machine, config.neurons_per_core);
    report.max_ensembles_per_chip = mapping.placement.max_ensembles_per_chip();
    write_text_file(path("placement.txt"), serialize_placement(mapping.placement, mapping.shapes));
    write_text_file(path("placement_summary.json"), placement_summary(mapping, machine));
    write_text_file(path("routing.txt"), serialize_routing_tables(mapping.routing));
    if (config.mode == RunMode::map)
    {
        return;
    }

    const NetworkModel net = build_network(spec, config.seed_network);
    std::vector<Polarity> polarity;
    for (const auto &p : net.populations)
        polarity.push_back(p.polarity);

    FiringStatsOptions stats_options;
    stats_options.discard_ms = config.discard_ms;
    stats_options.correlation_bin_ms = config.correlation_bin_ms;
    stats_options.correlation_sample = config.correlation_sample;
    stats_options.seed = config.seed_stats;

    json summary;
    summary["neurons"] = net.neuron_count();
    summary["synapses"] = net.synapses.size();
    summary["steps"] = steps;

    const auto finish_trace = [&](SpikeTrace trace, std::string_view tag) {
        trace.discard_ms = config.discard_ms;
        const std::string text = serialize_trace(trace);
        write_text_file(path(fmt::format("trace_{}.txt", tag)), text);
        write_text_file(path(fmt::format("timesteps_{}.tsv", tag)), timestep_table(trace, polarity));
        write_text_file(path(fmt::format("stats_{}.json", tag)),
                firing_stats_json(firing_stats(trace, stats_options)));
        return text;
    };

    std::string hardware_text;
    std::string oracle_text;
    if (config.mode == RunMode::hardware || config.mode == RunMode::both)
    {
        RuntimeOptions options;
        options.slowdown = config.slowdown;
        options.seed_poisson = config.seed_poisson;
        options.neurons_per_core = config.neurons_per_core;
        options.keep_profiles = config.write_profiles;
        if (config.clock_sync)
        {
            const double spread = config.drift_spread_ppm.value_or(machine.drift_spread_ppm);
            ClockSync sync(machine, sample_board_drift(machine, spread, config.seed_drift),
                    costs, config.slowdown, ClockSyncConfig{});
            std::vector<ChipCoord> used_chips = mapping.placement.chips;
            std::sort(used_chips.begin(), used_chips.end());
            options.schedule = tabulated_schedule(sync, mapping.placement.chips, steps);
            // Only chips that host ensembles; idle chips still run the protocol.
            std::vector<SyncDiagnostic> used;
            for (const auto &d : sync.diagnostics())
            {
                if (std::binary_search(used_chips.begin(), used_chips.end(), d.chip))
                    used.push_back(d);
            }
            write_text_file(path("sync_diagnostics.tsv"), serialize_sync_diagnostics(used));
        }
        HardwareRun hw = run_hardware(net, machine, costs, options, steps);
        const FlushReport flush = flush_report(hw.profiles);
        if (config.write_profiles)
        {
            write_text_file(path("profiles.tsv"), serialize_profiles(hw.profiles));
        }
        summary["hardware"] = summary_json(hw.summary, flush);
        report.hardware_spikes = hw.trace.events.size();
        report.flushed = hw.summary.flushed;
        hardware_text = finish_trace(std::move(hw.trace), "hardware");
    }
    if (config.mode == RunMode::oracle || config.mode == RunMode::both)
    {
        SpikeTrace trace = oracle_simulate(net, steps, {config.seed_poisson, true});
        report.oracle_spikes = trace.events.size();
        summary["oracle"] = {{"spikes", trace.events.size()}};
        oracle_text = finish_trace(std::move(trace), "oracle");
    }
    if (config.mode == RunMode::both)
    {
        const std::size_t diff = first_difference(hardware_text, oracle_text);
        report.traces_identical = diff == 0;
        summary["equivalence"] = {
                {"identical", diff == 0},
                {"first_differing_line", diff},
                {"hardware_spikes", report.hardware_spikes},
                {"oracle_spikes", report.oracle_spikes},
        };
    }
    write_text_file(path("summary.json"), summary.dump(2) + "\n");
    if (config.require_identical && report.traces_identical == false)
    {
        report.exit_code = kExitMismatch;
        report.message = "hardware and oracle traces differ";
    }
}

} // namespace

RunReport run(const RunConfig &config)
{
    RunReport report;
    try
    {
        execute(config, report);
    }
    catch (...)
    {
        report.exit_code = exit_code_for_current_exception(report.message);
    }
    return report;
}

std::string manifest_json(const RunConfig &c)
{
    json doc;
    doc["format"] = "ensim-manifest-1";
    doc["mode"] = to_string(c.mode);
    doc["duration_ms"] = c.duration_ms;
    doc["slowdown"] = c.slowdown;
    doc["scale"] = c.scale ? json(*c.scale) : json(nullptr);
    doc["input"] = c.input ? json(std::string(to_string(*c.input))) : json(nullptr);
    doc["seeds"] = {{"network", c.seed_network}, {"poisson", c.seed_poisson},
            {"drift", c.seed_drift}, {"stats", c.seed_stats}};
    doc["drift_spread_ppm"] = c.drift_spread_ppm ? json(*c.drift_spread_ppm) : json(nullptr);
    doc["clock_sync"] = c.clock_sync;
    doc["neurons_per_core"] = c.neurons_per_core;
    doc["analysis"] = {{"discard_ms", c.discard_ms},
            {"correlation_bin_ms", c.correlation_bin_ms},
            {"correlation_sample", c.correlation_sample}};
    doc["write_profiles"] = c.write_profiles;
    doc["require_identical"] = c.require_identical;
    // Parsed and re-serialised so the embedded texts are canonical and every
    // default in effect is spelled out.
    doc["model"] = serialize_network_spec(parse_network_spec(c.model_text));
    doc["machine"] = serialize_machine_spec(machine_of(c));
    doc["costs"] = serialize_cost_model(costs_of(c));
    doc["fixed"] = {{"ring_slots", kRingSlots},
            {"max_delay_steps", kMaxDelaySteps},
            {"poisson_headroom", kPoissonHeadroom},
            {"weight_max", kWeightMax},
            {"beacon_interval_s", ClockSyncConfig{}.beacon_interval_s},
            {"correlation_estimator", "pearson on binned spike counts"}};
    return doc.dump(2) + "\n";
}

RunConfig config_from_manifest(std::string_view text)
{
    const json doc = json::parse(text);
    if (doc.value("format", "") != "ensim-manifest-1")
    {
        throw SpecError("not an ensim manifest");
    }
    RunConfig c;
    c.mode = parse_run_mode(doc.at("mode").get<std::string>());
    c.duration_ms = doc.at("duration_ms").get<double>();
    c.slowdown = doc.at("slowdown").get<double>();
    if (!doc.at("scale").is_null())
        c.scale = doc.at("scale").get<double>();
    if (!doc.at("input").is_null())
        c.input = parse_input_variant(doc.at("input").get<std::string>());
    const auto &seeds = doc.at("seeds");
    c.seed_network = seeds.at("network").get<std::uint64_t>();
    c.seed_poisson = seeds.at("poisson").get<std::uint64_t>();
    c.seed_drift = seeds.at("drift").get<std::uint64_t>();
    c.seed_stats = seeds.at("stats").get<std::uint64_t>();
    if (!doc.at("drift_spread_ppm").is_null())
        c.drift_spread_ppm = doc.at("drift_spread_ppm").get<double>();
    c.clock_sync = doc.at("clock_sync").get<bool>();
    c.neurons_per_core = doc.at("neurons_per_core").get<std::uint32_t>();
    const auto &a = doc.at("analysis");
    c.discard_ms = a.at("discard_ms").get<double>();
    c.correlation_bin_ms = a.at("correlation_bin_ms").get<double>();
    c.correlation_sample = a.at("correlation_sample").get<std::uint32_t>();
    c.write_profiles = doc.at("write_profiles").get<bool>();
    c.require_identical = doc.at("require_identical").get<bool>();
    c.model_text = doc.at("model").get<std::string>();
    c.machine_text = doc.at("machine").get<std::string>();
    c.costs_text = doc.at("costs").get<std::string>();
    return c;
}

} // namespace ensim
