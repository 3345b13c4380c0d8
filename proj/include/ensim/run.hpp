#pragma once

// One complete run: parse the model, machine and cost texts, map the network,
// execute the hardware model and/or the reference simulator and write every
// artifact plus a manifest from which the run can be replayed exactly.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "ensim/network.hpp"

namespace ensim {

enum class RunMode
{
    hardware,
    oracle,
    both,
    map, // placement and routing only
};

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

// Process exit statuses, one per failure class.
enum ExitCode : int
{
    kExitOk = 0,
    kExitUsage = 1,
    kExitSpec = 2,
    kExitPlacement = 3,
    kExitKeys = 4,
    kExitRouting = 5,
    kExitIo = 6,
    kExitScheduling = 7,
    kExitMismatch = 8,
};

struct RunConfig
{
    // Spec texts rather than paths so a manifest carries everything.
    std::string model_text;
    std::string machine_text; // empty: built-in 24-board machine
    std::string costs_text;   // empty: measured defaults
    std::optional<double> scale;
    std::optional<InputVariant> input;
    RunMode mode{RunMode::hardware};
    double duration_ms{1000.0};
    double slowdown{1.0};
    std::uint64_t seed_network{1};
    std::uint64_t seed_poisson{1};
    std::uint64_t seed_drift{1};
    std::optional<double> drift_spread_ppm; // default from the machine
    bool clock_sync{true};
    std::uint32_t neurons_per_core{64};
    double discard_ms{0.0};
    double correlation_bin_ms{2.0};
    std::uint32_t correlation_sample{200};
    std::uint64_t seed_stats{1};
    bool write_profiles{true};
    bool require_identical{false};
    std::string out_dir{"ensim-out"};

    // Throws SpecError.
    void validate() const;
};

struct RunReport
{
    int exit_code{kExitOk};
    std::string message;
    std::optional<bool> traces_identical;
    std::uint64_t hardware_spikes{0};
    std::uint64_t oracle_spikes{0};
    std::uint64_t flushed{0};
    std::size_t max_ensembles_per_chip{0};
};

// Never throws; failures are mapped onto exit codes.
RunReport run(const RunConfig &config);

// Manifest document of a configuration; output directory excluded.
std::string manifest_json(const RunConfig &config);
RunConfig config_from_manifest(std::string_view json);

// Exit code for the exception currently being handled.
int exit_code_for_current_exception(std::string &message);

std::string read_text_file(const std::string &path);
void write_text_file(const std::string &path, std::string_view text);

} // namespace ensim
