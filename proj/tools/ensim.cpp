// Command-line front end: run / rerun simulations, energy arithmetic and
// statistics of an existing trace.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ensim/analysis.hpp"
#include "ensim/run.hpp"
#include "ensim/trace.hpp"

namespace {

int report_outcome(const ensim::RunReport &r, const std::string &out_dir)
{
    if (r.exit_code != ensim::kExitOk)
    {
        fmt::print(stderr, "ensim: {}\n", r.message);
        return r.exit_code;
    }
    fmt::print("outputs in {}\n", out_dir);
    fmt::print("max ensembles per chip: {}\n", r.max_ensembles_per_chip);
    if (r.hardware_spikes)
        fmt::print("hardware spikes: {} (flushed packets: {})\n", r.hardware_spikes, r.flushed);
    if (r.oracle_spikes)
        fmt::print("oracle spikes: {}\n", r.oracle_spikes);
    if (r.traces_identical)
        fmt::print("equivalence: {}\n", *r.traces_identical ? "identical" : "DIFFERENT");
    return ensim::kExitOk;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Deterministic simulator of a many-core neuromorphic machine"};
    app.require_subcommand(0, 1);

    ensim::RunConfig config;
    std::string model_path, machine_path, costs_path, mode = "hardware", input;
    std::optional<double> scale, drift;
    bool no_sync = false, no_profiles = false;

    app.add_option("--model", model_path, "Network model file")->check(CLI::ExistingFile);
    app.add_option("--machine", machine_path, "Machine description file")->check(CLI::ExistingFile);
    app.add_option("--costs", costs_path, "Cost-model override file")->check(CLI::ExistingFile);
    app.add_option("--scale", scale, "Population scale factor in (0, 1]");
    app.add_option("--input", input, "Background input: dc or poisson")
            ->check(CLI::IsMember({"dc", "poisson"}));
    app.add_option("--mode", mode, "hardware, oracle, both or map")
            ->check(CLI::IsMember({"hardware", "oracle", "both", "map"}));
    app.add_option("--duration-ms", config.duration_ms, "Simulated biological time");
    app.add_option("--slowdown", config.slowdown, "Timer period multiplier (>= 1)");
    app.add_option("--seed-network", config.seed_network);
    app.add_option("--seed-poisson", config.seed_poisson);
    app.add_option("--seed-drift", config.seed_drift);
    app.add_option("--seed-stats", config.seed_stats, "Correlation subsample seed");
    app.add_option("--drift-ppm", drift, "Board drift spread (default from machine)");
    app.add_flag("--no-sync", no_sync, "Aligned timers, no drift or beacons");
    app.add_option("--neurons-per-core", config.neurons_per_core);
    app.add_option("--discard-ms", config.discard_ms, "Initial window excluded from statistics");
    app.add_option("--bin-ms", config.correlation_bin_ms, "Correlation bin width");
    app.add_option("--sample", config.correlation_sample, "Neurons per population for correlations");
    app.add_flag("--no-profiles", no_profiles, "Skip the per-core profile table");
    app.add_flag("--require-identical", config.require_identical,
            "Exit nonzero if mode=both traces differ");
    app.add_option("--out", config.out_dir, "Output directory");

    auto *rerun = app.add_subcommand("rerun", "Replay a run from its manifest");
    std::string manifest_path, rerun_out = "ensim-rerun";
    rerun->add_option("manifest", manifest_path)->required()->check(CLI::ExistingFile);
    rerun->add_option("--out", rerun_out, "Output directory");

    auto *energy = app.add_subcommand("energy", "Energy per synaptic event");
    std::string table_path;
    std::optional<double> kwh, events, from_s, to_s;
    energy->add_option("--table", table_path, "Energy table file")->check(CLI::ExistingFile);
    energy->add_option("--kwh", kwh);
    energy->add_option("--events", events);
    energy->add_option("--from-s", from_s, "Duration the kWh figure covers");
    energy->add_option("--to-s", to_s, "Duration to scale the kWh figure to");

    auto *stats = app.add_subcommand("stats", "Firing statistics of a trace file");
    std::string trace_path, stats_out;
    ensim::FiringStatsOptions stats_options;
    stats->add_option("trace", trace_path)->required()->check(CLI::ExistingFile);
    stats->add_option("--discard-ms", stats_options.discard_ms);
    stats->add_option("--bin-ms", stats_options.correlation_bin_ms);
    stats->add_option("--sample", stats_options.correlation_sample);
    stats->add_option("--seed", stats_options.seed);
    stats->add_option("--out", stats_out, "Write the document here instead of stdout");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ensim::kExitUsage;
    }

    try
    {
        if (*rerun)
        {
            ensim::RunConfig replay =
                    ensim::config_from_manifest(ensim::read_text_file(manifest_path));
            replay.out_dir = rerun_out;
            return report_outcome(ensim::run(replay), rerun_out);
        }
        if (*energy)
        {
            if (!table_path.empty())
            {
                fmt::print("{:<24} {:>12} {:>14} {:>16}\n", "label", "kWh", "events", "uJ/event");
                for (const auto &row : ensim::load_energy_table(table_path))
                {
                    if (row.synaptic_events > 0.0)
                        fmt::print("{:<24} {:>12.6f} {:>14.4g} {:>16.3f}\n", row.label,
                                row.total_energy_kwh, row.synaptic_events,
                                ensim::energy_per_event_uj(row));
                    else
                        fmt::print("{:<24} {:>12.6f} {:>14} {:>16}\n", row.label,
                                row.total_energy_kwh, "-", "-");
                }
            }
            if (kwh && from_s && to_s)
            {
                fmt::print("{:.6f} kWh over {} s\n",
                        ensim::scale_energy_kwh(*kwh, *from_s, *to_s), *to_s);
            }
            if (kwh && events)
            {
                fmt::print("{:.3f} uJ/event\n",
                        ensim::energy_per_event_uj({"cli", 0.0, *kwh, *events}));
            }
            if (table_path.empty() && !(kwh && (events || (from_s && to_s))))
            {
                fmt::print(stderr, "energy: give --table, or --kwh with --events or --from-s/--to-s\n");
                return ensim::kExitUsage;
            }
            return 0;
        }
        if (*stats)
        {
            const auto doc = ensim::firing_stats_json(
                    ensim::firing_stats(ensim::read_trace(trace_path), stats_options));
            if (stats_out.empty())
                std::cout << doc;
            else
                ensim::write_text_file(stats_out, doc);
            return 0;
        }

        if (model_path.empty())
        {
            fmt::print(stderr, "--model is required\n{}", app.help());
            return ensim::kExitUsage;
        }
        config.model_text = ensim::read_text_file(model_path);
        if (!machine_path.empty())
            config.machine_text = ensim::read_text_file(machine_path);
        if (!costs_path.empty())
            config.costs_text = ensim::read_text_file(costs_path);
        config.scale = scale;
        if (!input.empty())
            config.input = ensim::parse_input_variant(input);
        config.mode = ensim::parse_run_mode(mode);
        config.drift_spread_ppm = drift;
        config.clock_sync = !no_sync;
        config.write_profiles = !no_profiles;
        return report_outcome(ensim::run(config), config.out_dir);
    }
    catch (...)
    {
        std::string message;
        const int rc = ensim::exit_code_for_current_exception(message);
        fmt::print(stderr, "ensim: {}\n", message);
        return rc;
    }
}
