#include "ensim/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <fmt/format.h>

namespace ensim {

std::string_view to_string(Polarity p)
{
    return p == Polarity::excitatory ? "excitatory" : "inhibitory";
}

std::string_view to_string(InputVariant v)
{
    return v == InputVariant::dc ? "dc" : "poisson";
}

Polarity parse_polarity(std::string_view text)
{
    if (text == "excitatory" || text == "exc" || text == "E")
    {
        return Polarity::excitatory;
    }
    if (text == "inhibitory" || text == "inh" || text == "I")
    {
        return Polarity::inhibitory;
    }
    throw SpecError(fmt::format("unknown polarity '{}'", text));
}

InputVariant parse_input_variant(std::string_view text)
{
    if (text == "dc")
    {
        return InputVariant::dc;
    }
    if (text == "poisson")
    {
        return InputVariant::poisson;
    }
    throw SpecError(fmt::format("unknown input variant '{}'", text));
}

const PopulationSpec &NetworkSpec::population(std::string_view name) const
{
    for (const auto &p : populations)
    {
        if (p.name == name)
        {
            return p;
        }
    }
    throw SpecError(fmt::format("unknown population '{}'", name));
}

const NeuronParams &NetworkSpec::neuron_model(std::string_view name) const
{
    for (const auto &m : neuron_models)
    {
        if (m.name == name)
        {
            return m.params;
        }
    }
    throw SpecError(fmt::format("unknown neuron model '{}'", name));
}

std::uint64_t NetworkSpec::total_neurons() const
{
    std::uint64_t n = 0;
    for (const auto &p : populations)
    {
        n += p.size;
    }
    return n;
}

Background NetworkSpec::background_of(const PopulationSpec &pop) const
{
    if (simulation.input == InputVariant::dc)
    {
        return pop.dc;
    }
    return pop.poisson;
}

void NetworkSpec::validate() const
{
    const double dt = simulation.dt_ms;
    if (!(dt > 0.0))
    {
        throw SpecError("dt_ms must be positive");
    }
    if (!(simulation.scale_factor > 0.0 && simulation.scale_factor <= 1.0))
    {
        throw SpecError("scale factor must lie in (0, 1]");
    }
    if (!(simulation.v_init_sd_mv >= 0.0))
    {
        throw SpecError("v_init_sd_mv must be non-negative");
    }
    for (const auto &m : neuron_models)
    {
        try
        {
            m.params.validate(dt);
        }
        catch (const KineticsError &e)
        {
            throw SpecError(fmt::format("neuron model '{}': {}", m.name,
                    e.what()));
        }
    }
    if (populations.empty())
    {
        throw SpecError("network has no populations");
    }
    for (std::size_t i = 0; i < populations.size(); ++i)
    {
        const auto &p = populations[i];
        if (p.size < 1)
        {
            throw SpecError(fmt::format("population '{}' is empty", p.name));
        }
        for (std::size_t j = 0; j < i; ++j)
        {
            if (populations[j].name == p.name)
            {
                throw SpecError(fmt::format("duplicate population '{}'",
                        p.name));
            }
        }
        (void) neuron_model(p.neuron_model);
        if (!(p.poisson.rate_hz >= 0.0))
        {
            throw SpecError(fmt::format("population '{}': negative rate",
                    p.name));
        }
    }
    for (const auto &proj : projections)
    {
        (void) population(proj.source);
        (void) population(proj.target);
        if (!(proj.probability >= 0.0 && proj.probability <= 1.0))
        {
            throw SpecError(fmt::format(
                    "projection {}: probability {} outside [0, 1]",
                    proj.name(), proj.probability));
        }
        if (!(proj.weight_sd_pa >= 0.0 && proj.delay_sd_ms >= 0.0))
        {
            throw SpecError(fmt::format(
                    "projection {}: negative standard deviation",
                    proj.name()));
        }
        if (proj.weight_mean_pa < 0.0)
        {
            throw SpecError(fmt::format(
                    "projection {}: weights are magnitudes, got mean {}",
                    proj.name(), proj.weight_mean_pa));
        }
        if (proj.delay_mean_ms > kMaxDelaySteps * dt)
        {
            throw SpecError(fmt::format(
                    "projection {}: mean delay {} ms exceeds {} timesteps",
                    proj.name(), proj.delay_mean_ms, kMaxDelaySteps));
        }
    }
}

NetworkSpec scale_network(const NetworkSpec &spec, double factor)
{
    if (!(factor > 0.0 && factor <= 1.0))
    {
        throw SpecError(fmt::format("scale factor {} outside (0, 1]", factor));
    }
    NetworkSpec out = spec;
    for (auto &p : out.populations)
    {
        const auto scaled = std::lround(static_cast<double>(p.size) * factor);
        p.size = static_cast<std::uint32_t>(std::max<long>(1, scaled));
    }
    out.simulation.scale_factor = spec.simulation.scale_factor * factor;
    return out;
}

std::uint16_t delay_to_steps(double delay_ms, double dt_ms)
{
    const double steps = std::round(delay_ms / dt_ms);
    return static_cast<std::uint16_t>(
            std::clamp(steps, 1.0, static_cast<double>(kMaxDelaySteps)));
}

std::size_t NetworkModel::population_of(std::uint32_t neuron) const
{
    const auto it = std::upper_bound(populations.begin(), populations.end(),
            neuron, [](std::uint32_t n, const Population &p) {
                return n < p.first;
            });
    return static_cast<std::size_t>(it - populations.begin()) - 1;
}

std::size_t NetworkModel::population_index(std::string_view name) const
{
    for (std::size_t i = 0; i < populations.size(); ++i)
    {
        if (populations[i].name == name)
        {
            return i;
        }
    }
    throw SpecError(fmt::format("unknown population '{}'", name));
}

namespace {

std::mt19937_64 stream_for(std::uint64_t seed, std::string_view label)
{
    // FNV-1a keeps stream seeds identical across standard libraries.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : label)
    {
        h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
            static_cast<std::uint32_t>(seed >> 32),
            static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

struct SampledSynapse
{
    std::uint32_t source;
    Synapse synapse;
};

} // namespace

NetworkModel build_network(const NetworkSpec &spec, std::uint64_t seed)
{
    spec.validate();
    if (spec.simulation.connectivity != ConnectivityScheme::pairwise_bernoulli)
    {
        throw SpecError("connectivity scheme 'fixed_total_number' is not "
                        "implemented");
    }
    if (spec.projections.size() > 0xFFFF)
    {
        throw SpecError("too many projections");
    }

    NetworkModel net;
    net.dt_ms = spec.simulation.dt_ms;
    net.scale_factor = spec.simulation.scale_factor;
    net.seed = seed;
    net.projections = spec.projections;

    std::uint32_t first = 0;
    for (const auto &ps : spec.populations)
    {
        Population p;
        p.name = ps.name;
        p.first = first;
        p.size = ps.size;
        p.polarity = ps.polarity;
        p.params = spec.neuron_model(ps.neuron_model);
        p.background = spec.background_of(ps);
        if (const auto *dc = std::get_if<DcInput>(&p.background))
        {
            p.params.i_dc_pa = dc->amplitude_pa;
        }
        first += ps.size;
        net.populations.push_back(std::move(p));
    }

    // Initial membrane potentials, one stream per population.
    net.initial_states.resize(first);
    for (const auto &p : net.populations)
    {
        auto rng = stream_for(seed, "init:" + p.name);
        std::normal_distribution<double> v0(spec.simulation.v_init_mean_mv,
                spec.simulation.v_init_sd_mv);
        for (std::uint32_t i = 0; i < p.size; ++i)
        {
            NeuronState &s = net.initial_states[p.first + i];
            s.v_mv = spec.simulation.v_init_sd_mv > 0.0
                    ? v0(rng)
                    : spec.simulation.v_init_mean_mv;
        }
    }

    // Each projection owns a stream derived from its name, so projections
    // can be sampled in any order with identical results.
    std::vector<SampledSynapse> sampled;
    for (std::size_t pi = 0; pi < spec.projections.size(); ++pi)
    {
        const auto &proj = spec.projections[pi];
        const auto src = net.population_index(proj.source);
        const auto tgt = net.population_index(proj.target);
        net.projection_source.push_back(static_cast<std::uint16_t>(src));
        net.projection_target.push_back(static_cast<std::uint16_t>(tgt));
        if (proj.probability <= 0.0)
        {
            continue;
        }
        const Population &sp = net.populations[src];
        const Population &tp = net.populations[tgt];
        const double sign = sp.polarity == Polarity::excitatory ? 1.0 : -1.0;

        auto rng = stream_for(seed, proj.name());
        std::geometric_distribution<std::uint64_t> gap(proj.probability);
        std::normal_distribution<double> weight(proj.weight_mean_pa,
                proj.weight_sd_pa);
        std::normal_distribution<double> delay(proj.delay_mean_ms,
                proj.delay_sd_ms);

        // Independent Bernoulli trial per ordered (pre, post) pair, sampled
        // by skipping geometrically distributed runs of failures.
        const std::uint64_t pairs =
                static_cast<std::uint64_t>(sp.size) * tp.size;
        std::uint64_t pair = proj.probability >= 1.0 ? 0 : gap(rng);
        while (pair < pairs)
        {
            const auto pre = static_cast<std::uint32_t>(pair / tp.size);
            const auto post = static_cast<std::uint32_t>(pair % tp.size);
            Synapse syn;
            syn.target = tp.first + post;
            syn.projection = static_cast<std::uint16_t>(pi);
            const double w = proj.weight_sd_pa > 0.0 ? weight(rng)
                                                     : proj.weight_mean_pa;
            syn.weight_pa = sign * std::max(0.0, w);
            const double d = proj.delay_sd_ms > 0.0 ? delay(rng)
                                                    : proj.delay_mean_ms;
            syn.delay_steps = delay_to_steps(d, net.dt_ms);
            sampled.push_back({sp.first + pre, syn});
            pair += 1 + (proj.probability >= 1.0 ? 0 : gap(rng));
        }
    }

    std::stable_sort(sampled.begin(), sampled.end(),
            [](const SampledSynapse &a, const SampledSynapse &b) {
                return a.source < b.source;
            });
    net.row_offsets.assign(first + 1, 0);
    for (const auto &s : sampled)
    {
        ++net.row_offsets[s.source + 1];
    }
    for (std::uint32_t i = 0; i < first; ++i)
    {
        net.row_offsets[i + 1] += net.row_offsets[i];
    }
    net.synapses.reserve(sampled.size());
    for (const auto &s : sampled)
    {
        net.synapses.push_back(s.synapse);
    }
    return net;
}

std::string NetworkModel::serialize() const
{
    std::string out;
    out += fmt::format("network dt_ms={} scale={} seed={} neurons={} "
                       "synapses={}\n",
            dt_ms, scale_factor, seed, neuron_count(), synapses.size());
    for (const auto &p : populations)
    {
        out += fmt::format("population {} first={} size={} {} i_dc={}\n",
                p.name, p.first, p.size, to_string(p.polarity),
                p.params.i_dc_pa);
    }
    for (std::uint32_t n = 0; n < neuron_count(); ++n)
    {
        out += fmt::format("v0 {} {}\n", n, initial_states[n].v_mv);
        for (const auto &s : outgoing(n))
        {
            out += fmt::format("{} {} {} {} {}\n", n, s.target, s.projection,
                    s.delay_steps, s.weight_pa);
        }
    }
    return out;
}

} // namespace ensim
