#include "ensim/oracle.hpp"

#include <algorithm>

namespace ensim {

ReferenceSimulator::ReferenceSimulator(const NetworkModel &net,
        OracleOptions options)
        : net_(&net)
        , options_(options)
        , weights_(quantise_weights(net))
        , states_(net.initial_states)
{
    const std::uint32_t n = net.neuron_count();
    pending_.assign(std::size_t{kSlots} * n, 0.0);
    poisson_next_.assign(n, 0.0);
    population_of_.resize(n);
    streams_.resize(n);
    for (std::uint32_t p = 0; p < net.populations.size(); ++p)
    {
        const auto &pop = net.populations[p];
        propagators_.emplace_back(pop.params, net.dt_ms);
        for (std::uint32_t i = pop.first; i < pop.first + pop.size; ++i)
        {
            population_of_[i] = p;
            streams_[i] = poisson_stream(options_.seed_poisson, i);
        }
    }
}

double ReferenceSimulator::pending(std::uint32_t step, std::uint32_t neuron) const
{
    return pending_[std::size_t{step % kSlots} * net_->neuron_count() + neuron];
}

void ReferenceSimulator::step()
{
    const NetworkModel &net = *net_;
    const std::uint32_t n = net.neuron_count();
    const std::uint32_t t = step_;
    double *now = pending_.data() + std::size_t{t % kSlots} * n;

    for (std::uint32_t i = 0; i < n; ++i)
    {
        const std::uint32_t p = population_of_[i];
        const double input = now[i] + poisson_next_[i];
        now[i] = 0.0;
        const StepResult r = propagators_[p].step(states_[i], input, i);
        states_[i] = r.state;
        if (!r.spiked)
        {
            continue;
        }
        events_.push_back({t, p, i - net.populations[p].first});
        for (const Synapse &syn : net.outgoing(i))
        {
            const std::uint32_t tp = net.projection_target[syn.projection];
            const double v = options_.quantise
                    ? weights_.contribution(p, tp, syn.weight_pa)
                    : syn.weight_pa;
            pending_[std::size_t{(t + syn.delay_steps) % kSlots} * n + syn.target] += v;
        }
    }

    // Background events drawn now feed the next step, as on the Poisson core.
    for (std::uint32_t i = 0; i < n; ++i)
    {
        const std::uint32_t p = population_of_[i];
        const auto *pin = std::get_if<PoissonInput>(&net.populations[p].background);
        if (!pin)
        {
            continue;
        }
        const std::uint32_t count = poisson_sample(pin->rate_hz, net.dt_ms, streams_[i]);
        poisson_next_[i] = options_.quantise ? weights_.poisson_input(p, count)
                                             : count * pin->weight_pa;
    }
    ++step_;
}

SpikeTrace ReferenceSimulator::trace() const
{
    SpikeTrace t = empty_trace(*net_, step_);
    t.events = events_;
    t.sort();
    return t;
}

SpikeTrace oracle_simulate(const NetworkModel &net, std::uint32_t steps,
        const OracleOptions &options)
{
    ReferenceSimulator sim(net, options);
    for (std::uint32_t s = 0; s < steps; ++s)
    {
        sim.step();
    }
    return sim.trace();
}

} // namespace ensim
