#pragma once

// Leaky integrate-and-fire neuron with exponentially decaying current-based
// synapses, integrated exactly per timestep, plus Poisson background sources.

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace ensim {

class KineticsError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct NeuronParams
{
    double tau_m_ms{10.0};
    double tau_syn_ms{0.5};
    double e_rest_mv{-65.0};
    double r_mohm{40.0};
    double v_thresh_mv{-50.0};
    double v_reset_mv{-65.0};
    double t_ref_ms{2.0};
    double i_dc_pa{0.0};

    // Throws KineticsError if invariants fail for the given timestep.
    void validate(double dt_ms) const;
    bool operator==(const NeuronParams &) const = default;
};

struct NeuronState
{
    double v_mv{0.0};
    double i_syn_pa{0.0};
    std::int32_t ref_remaining{0};
    bool operator==(const NeuronState &) const = default;
};

struct StepResult
{
    NeuronState state;
    bool spiked{false};
};

// Exact propagator of the linear subthreshold system over one timestep.
// Computed once per (params, dt) and shared by every integration path so the
// hardware model and the reference oracle produce bit-identical trajectories.
class LifPropagator
{
public:
    LifPropagator() = default;
    LifPropagator(const NeuronParams &params, double dt_ms);

    [[nodiscard]] StepResult step(const NeuronState &state, double input_pa,
            std::uint64_t neuron_id = 0) const;

    [[nodiscard]] const NeuronParams &params() const { return params_; }
    [[nodiscard]] double dt_ms() const { return dt_ms_; }
    [[nodiscard]] std::int32_t refractory_steps() const { return ref_steps_; }

private:
    NeuronParams params_{};
    double dt_ms_{0.1};
    double decay_m_{0.0};      // exp(-dt/tau_m)
    double decay_syn_{0.0};    // exp(-dt/tau_syn)
    double syn_to_v_{0.0};     // mV per pA of I_syn at step start
    double dc_to_v_{0.0};      // mV per pA of I_dc
    std::int32_t ref_steps_{0};
};

// One timestep of the neuron: `input_pa` is added to I_syn at step start, the
// state is advanced over [t, t+dt) and the threshold is checked.
[[nodiscard]] StepResult lif_step(const NeuronState &state,
        const NeuronParams &params, double input_pa, double dt_ms);

// Deterministic 64-bit stream (SplitMix64). Small enough to keep one per
// Poisson source; satisfies UniformRandomBitGenerator.
class RandomStream
{
public:
    using result_type = std::uint64_t;

    RandomStream() = default;
    explicit RandomStream(std::uint64_t seed) : state_(seed) {}
    RandomStream(std::uint64_t seed, std::uint64_t stream_id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }
    result_type operator()();

    // Uniform double in [0, 1) with 53 random bits.
    double uniform();

    bool operator==(const RandomStream &) const = default;

private:
    std::uint64_t state_{0};
};

struct PoissonSourceSpec
{
    double rate_hz{0.0};
    double weight_pa{0.0};
};

// Number of events from a Poisson process of `rate_hz` within `dt_ms`.
// Means below 30 consume exactly one draw from the stream.
[[nodiscard]] std::uint32_t poisson_sample(double rate_hz, double dt_ms,
        RandomStream &stream);

} // namespace ensim
