#pragma once

// Per-timestep execution of core ensembles under a measured cost model:
// neuron cores, Poisson cores and synapse cores with their spike-processing
// pipeline, deadline flush and timed SDRAM transfers, driven by a virtual-time
// event queue across the whole machine.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ensim/hardware.hpp"
#include "ensim/kinetics.hpp"
#include "ensim/network.hpp"
#include "ensim/trace.hpp"

namespace ensim {

// A core overran its timer period; the ensemble is mis-sized for real time.
class SchedulingError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct CostModel
{
    double neuron_update_us{1.05};
    double neuron_input_read_us{2.68};  // DMA D
    double spike_single_target_us{3.55};
    double pipeline_kickstart_us{0.18};
    double extra_word_us{0.2};
    double row_fetch_us{1.0};           // DMA A share of a row's cost
    double sdram_write_mean_us{5.0};    // DMA B, one writer
    double sdram_write_max_us{7.2};
    double writers_at_max{9.0};
    double poisson_update_us{63.81};    // per 64 sources, DMA C included
    double second_timer_margin_us{10.0};
    double timer_period_us{100.0};
    double clock_hz{200e6};

    void validate() const;

    // Fixed-stride synaptic row processing: lookup, fetch and per-word work.
    // A row of one word under no contention costs spike_single_target_us.
    [[nodiscard]] double row_cost_us(std::size_t words, double writers) const;
    [[nodiscard]] double sdram_write_us(double writers) const;
    [[nodiscard]] double contention_factor(double writers) const;
    [[nodiscard]] double cycles_per_period() const
    {
        return timer_period_us * clock_hz * 1e-6;
    }
    bool operator==(const CostModel &) const = default;
};

CostModel parse_cost_model(std::string_view text);
CostModel load_cost_model(const std::string &path);
std::string serialize_cost_model(const CostModel &costs);

// ---------------------------------------------------------------------------
// Synaptic data as held in SDRAM.

inline constexpr std::uint32_t kRingSlots = 255;
inline constexpr std::uint32_t kWeightMax = 0xFFFF;

// [31:16] weight magnitude, [15:8] delay, [7:6] synapse type, [5:0] target.
struct SynapticWord
{
    std::uint16_t weight{0};
    std::uint8_t delay{1};
    std::uint8_t type{0}; // 0 excitatory, 1 inhibitory
    std::uint8_t target{0};

    [[nodiscard]] std::uint32_t encode() const;
    static SynapticWord decode(std::uint32_t word);
    bool operator==(const SynapticWord &) const = default;
};

// Power-of-two fixed-point scale: stored = round(|w| * 2^exponent).
struct WeightScale
{
    int exponent{0};

    [[nodiscard]] std::uint16_t quantize(double magnitude) const;
    [[nodiscard]] double value(std::uint32_t stored) const;
    bool operator==(const WeightScale &) const = default;
};

// Largest exponent keeping `max_magnitude` within `limit`.
WeightScale weight_scale_for(double max_magnitude,
        std::uint32_t limit = kWeightMax);

// Scales shared by the hardware path and the quantising reference
// simulator: one per (source population, target population) pair for
// synapses and one per population for the Poisson input buffer, which keeps
// headroom for kPoissonHeadroom coincident events.
inline constexpr std::uint32_t kPoissonHeadroom = 16;

struct QuantisedWeights
{
    std::size_t populations{0};
    std::vector<Polarity> polarity;
    std::vector<WeightScale> pair_scale;   // [source * populations + target]
    std::vector<WeightScale> poisson_scale;
    std::vector<std::uint16_t> poisson_weight;

    [[nodiscard]] const WeightScale &scale(std::size_t source,
            std::size_t target) const
    {
        return pair_scale[source * populations + target];
    }
    // Signed contribution of one synapse after quantisation.
    [[nodiscard]] double contribution(std::size_t source_pop,
            std::size_t target_pop, double weight_pa) const;
    // Poisson input of `count` events into a saturating 16-bit entry.
    [[nodiscard]] double poisson_input(std::size_t pop, std::uint32_t count,
            bool *saturated = nullptr) const;
};

QuantisedWeights quantise_weights(const NetworkModel &net);

// Per-neuron circular accumulators of future input.
class RingBuffer
{
public:
    explicit RingBuffer(std::uint32_t neurons = kMaxNeuronsPerCore);

    // Input for `target` arriving `delay` steps after `step`.
    void add(std::uint32_t step, std::uint32_t delay, std::uint32_t target,
            double value);
    // Copies out the slot for `step` and zeroes it.
    void take(std::uint32_t step, std::span<double> out);
    [[nodiscard]] double peek(std::uint32_t step, std::uint32_t target) const;
    [[nodiscard]] std::uint32_t neurons() const { return neurons_; }

private:
    std::uint32_t neurons_;
    std::vector<double> slots_; // [slot * neurons + target]
};

// Key prefix -> synaptic matrix region for one synapse core.
struct MasterPopulationTable
{
    struct Entry
    {
        std::uint32_t key{0};
        std::uint32_t mask{0};
        std::uint32_t base{0};   // word address of the first row
        std::uint32_t stride{0}; // words per row, header included
        WeightScale scale;
    };
    std::vector<Entry> entries; // sorted by key

    [[nodiscard]] const Entry *find(std::uint32_t key) const;
    [[nodiscard]] static std::uint32_t row_address(const Entry &e,
            std::uint32_t key);
};

// Rows are [length, word, word, ...] padded to the entry stride.
struct SynapticMatrix
{
    MasterPopulationTable table;
    std::vector<std::uint32_t> words;

    // Words of the row addressed by `key`; empty if the key has no entry.
    [[nodiscard]] std::span<const std::uint32_t> row(std::uint32_t key) const;
};

struct ProfileRecord
{
    CoreAddress core;
    CoreRole role{CoreRole::synapse_exc_lower};
    std::uint32_t step{0};
    std::uint32_t received{0};
    std::uint32_t processed{0};
    std::uint32_t flushed{0};
    std::uint32_t zero_target{0};
    std::uint32_t kickstarts{0};
    std::uint32_t cross_timestep{0};
    std::uint64_t events_processed{0};
    std::uint64_t events_flushed{0};
    double busy_us{0.0};
    bool operator==(const ProfileRecord &) const = default;
};

std::string serialize_profiles(std::span<const ProfileRecord> records);

// ---------------------------------------------------------------------------
// Core models.

struct Packet
{
    double arrival_us{0.0};
    std::uint32_t key{0};
    std::uint32_t send_step{0};
};

// Synapse core: buffers packets, runs the lookup/fetch/accumulate pipeline
// within its window and flushes what is left at the second timer event.
class SynapseCore
{
public:
    SynapseCore(CoreAddress address, CoreRole role, SynapticMatrix matrix,
            std::uint32_t neurons, const CostModel &costs, double writers);

    // Timer event: opens the processing window of `step`; the second timer
    // (deadline) follows one period minus the margin later.
    void open_window(std::uint32_t step, double open_us);
    void receive(const Packet &packet);
    // Runs the pipeline up to `time_us` (never past the deadline).
    void advance(double time_us);
    // Second timer event: flush, write the next step's input (DMA B) and
    // close the profile interval.
    ProfileRecord close_window();

    // Input written for `step` at the previous deadline.
    [[nodiscard]] std::span<const double> written_input(
            std::uint32_t step) const;

    [[nodiscard]] const CoreAddress &address() const { return address_; }
    [[nodiscard]] CoreRole role() const { return role_; }
    [[nodiscard]] const SynapticMatrix &matrix() const { return matrix_; }
    [[nodiscard]] const RingBuffer &ring() const { return ring_; }
    [[nodiscard]] std::uint32_t step() const { return step_; }
    [[nodiscard]] double deadline_us() const { return deadline_us_; }
    [[nodiscard]] std::size_t buffered() const { return queue_.size() - head_; }

private:
    CoreAddress address_;
    CoreRole role_;
    SynapticMatrix matrix_;
    const CostModel *costs_;
    double writers_;
    RingBuffer ring_;

    std::uint32_t step_{0};
    double open_us_{0.0};
    double deadline_us_{0.0};
    bool window_open_{false};
    bool fresh_window_{true};
    double free_at_us_{-1e300};
    std::vector<Packet> queue_;
    std::size_t head_{0};
    ProfileRecord record_;

    std::uint32_t written_step_{0};
    std::vector<double> written_;
};

// Processes one whole window of time-ordered arrivals; the core must be
// between windows. Arrivals at or after the deadline are flushed.
ProfileRecord synapse_core_run_window(SynapseCore &core,
        std::span<const Packet> arrivals, std::uint32_t step, double open_us);

struct EmittedSpike
{
    std::uint32_t local_index{0};
    double send_us{0.0};
};

struct NeuronCoreResult
{
    std::vector<EmittedSpike> spikes;
    double busy_us{0.0};
};

class NeuronCore
{
public:
    NeuronCore(const LifPropagator &propagator, std::uint32_t first_neuron,
            std::vector<NeuronState> initial, const CostModel &costs);

    // Timer event of `step`: DMA D, then every neuron in index order.
    NeuronCoreResult step(double event_us, std::span<const double> input_pa);

    [[nodiscard]] const std::vector<NeuronState> &states() const
    {
        return states_;
    }

private:
    const LifPropagator *propagator_;
    std::uint32_t first_neuron_;
    std::vector<NeuronState> states_;
    const CostModel *costs_;
};

NeuronCoreResult neuron_core_step(NeuronCore &core, double event_us,
        std::span<const double> input_pa);

struct PoissonCoreResult
{
    double busy_us{0.0};
    std::uint32_t saturations{0};
};

// One source per target neuron; samples drawn at step t feed step t + 1.
class PoissonCore
{
public:
    PoissonCore(std::uint32_t first_neuron, std::uint32_t neurons,
            double rate_hz, double dt_ms, WeightScale scale,
            std::uint16_t weight, std::uint64_t seed, const CostModel &costs);

    PoissonCoreResult step(std::uint32_t step);
    // Buffer entries (fixed point) produced for `step`.
    [[nodiscard]] std::span<const std::uint16_t> buffer_for(
            std::uint32_t step) const;
    [[nodiscard]] const WeightScale &scale() const { return scale_; }

private:
    double rate_hz_;
    double dt_ms_;
    WeightScale scale_;
    std::uint16_t weight_;
    std::vector<RandomStream> streams_;
    const CostModel *costs_;
    // Double buffered by step parity: written for t + 1 while t is read.
    std::array<std::uint32_t, 2> buffer_step_{0, 1};
    std::array<std::vector<std::uint16_t>, 2> buffers_;
};

PoissonCoreResult poisson_core_step(PoissonCore &core, std::uint32_t step);

// Stream of a network neuron's Poisson source, shared with the reference
// simulator.
RandomStream poisson_stream(std::uint64_t seed, std::uint32_t neuron);

// ---------------------------------------------------------------------------
// Whole-machine stepper.

// Global time (us) of a chip's timer event for `step`.
using TimerSchedule = std::function<double(ChipCoord chip, std::uint32_t step)>;

TimerSchedule aligned_schedule(double period_us);

struct RuntimeOptions
{
    double slowdown{1.0};
    std::uint64_t seed_poisson{1};
    std::uint32_t neurons_per_core{kMaxNeuronsPerCore};
    bool keep_profiles{true};
    // Defaults to every chip sharing aligned timer edges.
    TimerSchedule schedule;
};

struct RunSummary
{
    std::uint32_t steps{0};
    std::uint64_t spikes{0};
    std::uint64_t packets_sent{0};
    std::uint64_t received{0};
    std::uint64_t processed{0};
    std::uint64_t flushed{0};
    std::uint64_t zero_target{0};
    std::uint64_t kickstarts{0};
    std::uint64_t cross_timestep{0};
    std::uint64_t events_processed{0};
    std::uint64_t events_flushed{0};
    std::uint64_t poisson_saturations{0};
    std::uint32_t max_flushed_in_step{0};
    std::uint32_t max_received_in_step{0};
    double max_neuron_busy_us{0.0};
    double max_synapse_busy_us{0.0};
    std::size_t chips{0};
    std::size_t cores{0};
    std::size_t routing_entries_max{0};
};

struct HardwareRun
{
    SpikeTrace trace;
    std::vector<ProfileRecord> profiles;
    RunSummary summary;
};

// Host mapping of a network onto the machine.
struct Mapping
{
    std::vector<PopulationShape> shapes;
    Placement placement;
    KeyAllocation keys;
    ConnectivitySummary connectivity;
    RoutingTables routing;
};

Mapping map_network(const NetworkModel &net, const MachineSpec &machine,
        std::uint32_t neurons_per_core = kMaxNeuronsPerCore);
// Same mapping straight from a spec, without sampling synapses.
Mapping map_network(const NetworkSpec &spec, const MachineSpec &machine,
        std::uint32_t neurons_per_core = kMaxNeuronsPerCore);

class MachineSimulation
{
public:
    MachineSimulation(const NetworkModel &net, const MachineSpec &machine,
            const CostModel &costs, RuntimeOptions options);
    ~MachineSimulation();
    MachineSimulation(const MachineSimulation &) = delete;
    MachineSimulation &operator=(const MachineSimulation &) = delete;

    // Executes every event of timestep `step()` and moves to the next one.
    void step_machine();
    HardwareRun run(std::uint32_t steps);

    [[nodiscard]] std::uint32_t step() const;
    [[nodiscard]] const Mapping &mapping() const;
    [[nodiscard]] const SpikeTrace &trace() const;
    [[nodiscard]] const RunSummary &summary() const;
    [[nodiscard]] std::span<const ProfileRecord> profiles() const;
    [[nodiscard]] std::span<const SynapseCore> synapse_cores() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

HardwareRun run_hardware(const NetworkModel &net, const MachineSpec &machine,
        const CostModel &costs, const RuntimeOptions &options,
        std::uint32_t steps);

} // namespace ensim
