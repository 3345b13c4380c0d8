#pragma once

// Direct clock-driven simulation of a NetworkModel with no hardware, cost or
// flush modelling; the correctness baseline for the machine model.

#include <cstdint>
#include <vector>

#include "ensim/kinetics.hpp"
#include "ensim/network.hpp"
#include "ensim/runtime.hpp"
#include "ensim/trace.hpp"

namespace ensim {

struct OracleOptions
{
    std::uint64_t seed_poisson{1};
    // Use the hardware's fixed-point weights and saturating Poisson buffer,
    // making results bit-identical to an unflushed hardware run.
    bool quantise{true};
};

class ReferenceSimulator
{
public:
    ReferenceSimulator(const NetworkModel &net, OracleOptions options);

    void step();
    [[nodiscard]] std::uint32_t current_step() const { return step_; }
    [[nodiscard]] const std::vector<NeuronState> &states() const
    {
        return states_;
    }
    // Input queued for `neuron` at a future step (exposed for tests).
    [[nodiscard]] double pending(std::uint32_t step, std::uint32_t neuron) const;
    [[nodiscard]] SpikeTrace trace() const;

private:
    static constexpr std::uint32_t kSlots = kMaxDelaySteps + 1;

    const NetworkModel *net_;
    OracleOptions options_;
    QuantisedWeights weights_;
    std::vector<LifPropagator> propagators_;
    std::vector<std::uint32_t> population_of_;
    std::vector<NeuronState> states_;
    std::vector<double> pending_; // [slot * neurons + neuron]
    std::vector<RandomStream> streams_;
    std::vector<double> poisson_next_;
    std::uint32_t step_{0};
    std::vector<SpikeEvent> events_;
};

SpikeTrace oracle_simulate(const NetworkModel &net, std::uint32_t steps,
        const OracleOptions &options);

} // namespace ensim
