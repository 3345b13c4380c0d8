#pragma once

// Declarative network specifications (populations, probabilistic
// projections, background input) and their materialisation into a concrete
// NetworkModel with sampled synapses.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ensim/kinetics.hpp"

namespace ensim {

// Longest delay representable by a synaptic input ring buffer.
inline constexpr std::uint32_t kMaxDelaySteps = 255;

class SpecError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class Polarity
{
    excitatory,
    inhibitory,
};

enum class InputVariant
{
    dc,
    poisson,
};

std::string_view to_string(Polarity p);
std::string_view to_string(InputVariant v);
Polarity parse_polarity(std::string_view text);
InputVariant parse_input_variant(std::string_view text);

struct DcInput
{
    double amplitude_pa{0.0};
    bool operator==(const DcInput &) const = default;
};

struct PoissonInput
{
    double rate_hz{0.0};
    double weight_pa{0.0};
    bool operator==(const PoissonInput &) const = default;
};

using Background = std::variant<DcInput, PoissonInput>;

struct NamedNeuronParams
{
    std::string name;
    NeuronParams params;
    bool operator==(const NamedNeuronParams &) const = default;
};

// A population as written in a spec file. The file carries both background
// alternatives; the network spec input variant selects the one materialised.
struct PopulationSpec
{
    std::string name;
    std::uint32_t size{1};
    Polarity polarity{Polarity::excitatory};
    std::string neuron_model;
    PoissonInput poisson;
    DcInput dc;
    bool operator==(const PopulationSpec &) const = default;
};

// Weights and their spread are magnitudes; the sign follows the source
// population's polarity.
struct ProjectionSpec
{
    std::string source;
    std::string target;
    double probability{0.0};
    double weight_mean_pa{0.0};
    double weight_sd_pa{0.0};
    double delay_mean_ms{1.0};
    double delay_sd_ms{0.0};

    [[nodiscard]] std::string name() const { return source + "->" + target; }
    bool operator==(const ProjectionSpec &) const = default;
};

enum class ConnectivityScheme
{
    pairwise_bernoulli,
    fixed_total_number, // accepted by the parser, rejected by the builder
};

struct SimulationSpec
{
    double dt_ms{0.1};
    InputVariant input{InputVariant::poisson};
    double v_init_mean_mv{-58.0};
    double v_init_sd_mv{5.0};
    double scale_factor{1.0};
    ConnectivityScheme connectivity{ConnectivityScheme::pairwise_bernoulli};
    bool operator==(const SimulationSpec &) const = default;
};

struct NetworkSpec
{
    SimulationSpec simulation;
    std::vector<NamedNeuronParams> neuron_models;
    std::vector<PopulationSpec> populations;
    std::vector<ProjectionSpec> projections;

    bool operator==(const NetworkSpec &) const = default;

    // Throws SpecError describing the first problem found.
    void validate() const;

    [[nodiscard]] const PopulationSpec &population(std::string_view name) const;
    [[nodiscard]] const NeuronParams &neuron_model(std::string_view name) const;
    [[nodiscard]] std::uint64_t total_neurons() const;
    [[nodiscard]] Background background_of(const PopulationSpec &pop) const;
};

// Text format, sections [simulation], [neuron NAME], [population],
// [projection]; see README for the column layout.
NetworkSpec parse_network_spec(std::string_view text);
NetworkSpec load_network_spec(const std::string &path);
std::string serialize_network_spec(const NetworkSpec &spec);

// Uniform down-scaling of population sizes (rounded, minimum 1).
NetworkSpec scale_network(const NetworkSpec &spec, double factor);

struct Synapse
{
    std::uint32_t target{0};
    std::uint16_t delay_steps{1};
    std::uint16_t projection{0};
    double weight_pa{0.0};
};

struct Population
{
    std::string name;
    std::uint32_t first{0};
    std::uint32_t size{0};
    Polarity polarity{Polarity::excitatory};
    NeuronParams params; // I_dc already set for DC background
    Background background;
};

struct NetworkModel
{
    double dt_ms{0.1};
    double scale_factor{1.0};
    std::uint64_t seed{0};
    std::vector<Population> populations;
    std::vector<ProjectionSpec> projections;
    std::vector<std::uint16_t> projection_source;
    std::vector<std::uint16_t> projection_target;
    std::vector<NeuronState> initial_states;

    // Outgoing synapses by source neuron (CSR), ordered by (projection,
    // target) within a row.
    std::vector<std::uint64_t> row_offsets;
    std::vector<Synapse> synapses;

    [[nodiscard]] std::uint32_t neuron_count() const
    {
        return static_cast<std::uint32_t>(initial_states.size());
    }
    [[nodiscard]] std::span<const Synapse> outgoing(std::uint32_t neuron) const
    {
        return {synapses.data() + row_offsets[neuron],
                synapses.data() + row_offsets[neuron + 1]};
    }
    [[nodiscard]] std::size_t population_of(std::uint32_t neuron) const;
    [[nodiscard]] std::size_t population_index(std::string_view name) const;

    // Canonical text dump; identical models serialise to identical bytes.
    [[nodiscard]] std::string serialize() const;
};

NetworkModel build_network(const NetworkSpec &spec, std::uint64_t seed);

// Nearest-timestep rounding clamped to [1, kMaxDelaySteps].
std::uint16_t delay_to_steps(double delay_ms, double dt_ms);

} // namespace ensim
