#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <fmt/format.h>

#include "ensim/runtime.hpp"

namespace ensim {

Mapping map_network(const NetworkModel &net, const MachineSpec &machine,
        std::uint32_t neurons_per_core)
{
    Mapping m;
    m.shapes = population_shapes(net);
    m.placement = place_radial(partition(m.shapes, neurons_per_core), machine);
    m.keys = allocate_keys(m.placement, m.shapes);
    m.connectivity = connectivity_summary(net);
    m.routing = build_routing_tables(machine, m.placement, m.keys, m.shapes,
            m.connectivity);
    return m;
}

Mapping map_network(const NetworkSpec &spec, const MachineSpec &machine,
        std::uint32_t neurons_per_core)
{
    spec.validate();
    Mapping m;
    m.shapes = population_shapes(spec);
    m.placement = place_radial(partition(m.shapes, neurons_per_core), machine);
    m.keys = allocate_keys(m.placement, m.shapes);
    m.connectivity = connectivity_summary(spec);
    m.routing = build_routing_tables(machine, m.placement, m.keys, m.shapes,
            m.connectivity);
    return m;
}

TimerSchedule aligned_schedule(double period_us)
{
    return [period_us](ChipCoord, std::uint32_t step) {
        return static_cast<double>(step) * period_us;
    };
}

namespace {

constexpr std::size_t kSynapseRoles = 3;

std::size_t synapse_slot(CoreRole role)
{
    return static_cast<std::size_t>(role) -
            static_cast<std::size_t>(CoreRole::synapse_exc_lower);
}

enum class EventKind : std::uint8_t
{
    window_open = 0,
    neuron_timer = 1,
    poisson_timer = 2,
    packet = 3,
    deadline = 4,
};

struct Event
{
    double time{0.0};
    ChipCoord chip;
    int core{0};
    std::uint32_t key{0};
    EventKind kind{EventKind::packet};
    std::uint64_t seq{0};
    std::uint32_t target{0}; // ensemble or synapse core index
    std::uint32_t step{0};
};

struct Later
{
    bool operator()(const Event &a, const Event &b) const
    {
        return std::tie(a.time, a.chip, a.core, a.key, a.kind, a.seq) >
                std::tie(b.time, b.chip, b.core, b.key, b.kind, b.seq);
    }
};

struct Route
{
    std::uint32_t synapse_core{0};
    double latency_us{0.0};
};

} // namespace

struct MachineSimulation::Impl
{
    const NetworkModel *net{nullptr};
    MachineSpec machine;
    CostModel costs; // period already scaled by the slow-down factor
    RuntimeOptions options;
    Mapping mapping;
    QuantisedWeights weights;

    std::vector<LifPropagator> propagators;
    std::vector<NeuronCore> neuron_cores;          // per ensemble
    std::vector<std::int32_t> poisson_index;       // per ensemble, -1 if none
    std::vector<PoissonCore> poisson_cores;
    std::vector<SynapseCore> synapse_cores;        // ensemble * 3 + slot
    std::vector<std::vector<Route>> routes;        // per ensemble
    std::vector<std::uint32_t> ensemble_first;     // per population

    std::priority_queue<Event, std::vector<Event>, Later> queue;
    std::uint64_t seq{0};
    std::uint32_t current{0};
    std::uint32_t limit{std::numeric_limits<std::uint32_t>::max()};

    SpikeTrace trace;
    std::vector<ProfileRecord> profiles;
    RunSummary summary;
    std::vector<double> input; // scratch

    void build();
    void build_synapse_cores();
    void push(Event e)
    {
        e.seq = seq++;
        queue.push(e);
    }
    void schedule_timers(std::uint32_t step);
    void handle(const Event &e);
};

void MachineSimulation::Impl::build()
{
    costs.timer_period_us *= options.slowdown;
    costs.validate();
    if (!options.schedule)
    {
        options.schedule = aligned_schedule(costs.timer_period_us);
    }
    mapping = map_network(*net, machine, options.neurons_per_core);
    weights = quantise_weights(*net);

    const auto &pl = mapping.placement;
    std::uint32_t e = 0;
    for (std::size_t p = 0; p < net->populations.size(); ++p)
    {
        ensemble_first.push_back(e);
        while (e < pl.ensembles.size() && pl.ensembles[e].population == p)
        {
            ++e;
        }
    }

    propagators.reserve(net->populations.size());
    for (const auto &p : net->populations)
    {
        propagators.emplace_back(p.params, net->dt_ms);
    }

    for (std::size_t i = 0; i < pl.ensembles.size(); ++i)
    {
        const auto &ens = pl.ensembles[i];
        const auto &pop = net->populations[ens.population];
        std::vector<NeuronState> init(
                net->initial_states.begin() + ens.first_neuron,
                net->initial_states.begin() + ens.first_neuron + ens.neuron_count);
        neuron_cores.emplace_back(propagators[ens.population], ens.first_neuron,
                std::move(init), costs);
        if (ens.has_poisson)
        {
            const auto &pin = std::get<PoissonInput>(pop.background);
            poisson_index.push_back(static_cast<std::int32_t>(poisson_cores.size()));
            poisson_cores.emplace_back(ens.first_neuron, ens.neuron_count,
                    pin.rate_hz, net->dt_ms, weights.poisson_scale[ens.population],
                    weights.poisson_weight[ens.population], options.seed_poisson,
                    costs);
        }
        else
        {
            poisson_index.push_back(-1);
        }
    }

    build_synapse_cores();

    std::map<CoreAddress, std::uint32_t> core_index;
    for (std::uint32_t s = 0; s < synapse_cores.size(); ++s)
    {
        core_index[synapse_cores[s].address()] = s;
    }
    routes.resize(pl.ensembles.size());
    for (std::size_t i = 0; i < pl.ensembles.size(); ++i)
    {
        if (destination_cores(pl, mapping.shapes, mapping.connectivity, i).empty())
        {
            continue;
        }
        for (const auto &d : route_packet(machine, mapping.routing,
                     pl.placed[i].chip, mapping.keys.base_key[i]))
        {
            const auto it = core_index.find(d.core);
            if (it == core_index.end())
            {
                throw RoutingError(fmt::format(
                        "ensemble {} routes to ({},{},{}), not a synapse core",
                        i, d.core.chip.x, d.core.chip.y, d.core.core));
            }
            routes[i].push_back({it->second, d.cost.latency_ns(machine) * 1e-3});
        }
    }

    trace = empty_trace(*net, 0);
    input.assign(kMaxNeuronsPerCore, 0.0);
    summary.chips = pl.chips.size();
    summary.cores = pl.cores_used();
    summary.routing_entries_max = mapping.routing.max_entries();
    schedule_timers(0);
}

void MachineSimulation::Impl::build_synapse_cores()
{
    const auto &pl = mapping.placement;
    const std::uint32_t npc = options.neurons_per_core;
    const std::size_t npop = net->populations.size();
    const auto roster = pl.roster();

    // rows[core][source population] -> rows indexed by subpop * 64 + neuron
    using Rows = std::vector<std::vector<std::uint32_t>>;
    std::vector<std::map<std::uint32_t, Rows>> rows(pl.ensembles.size() *
            kSynapseRoles);

    const auto role_for = [&](std::uint32_t src_ensemble) {
        const auto &ens = pl.ensembles[src_ensemble];
        if (net->populations[ens.population].polarity == Polarity::inhibitory)
            return CoreRole::synapse_inh;
        return ens.upper_half ? CoreRole::synapse_exc_upper
                              : CoreRole::synapse_exc_lower;
    };
    const auto rows_for = [&](std::size_t core, std::uint32_t src_pop) -> Rows & {
        auto &r = rows[core][src_pop];
        if (r.empty())
        {
            const std::uint32_t nsub =
                    (net->populations[src_pop].size + npc - 1) / npc;
            r.resize(std::size_t{nsub} * kMaxNeuronsPerCore);
        }
        return r;
    };

    // Every declared projection gets a table entry on every matching core,
    // sampled synapses or not.
    for (const auto &[src, tgt] : mapping.connectivity.projections)
    {
        for (std::uint32_t s = ensemble_first[src];
                s < pl.ensembles.size() && pl.ensembles[s].population == src; ++s)
        {
            const auto slot = synapse_slot(role_for(s));
            for (std::uint32_t f = ensemble_first[tgt];
                    f < pl.ensembles.size() && pl.ensembles[f].population == tgt;
                    ++f)
            {
                rows_for(f * kSynapseRoles + slot, src);
            }
        }
    }

    for (std::uint32_t sp = 0; sp < npop; ++sp)
    {
        const auto &p = net->populations[sp];
        for (std::uint32_t local = 0; local < p.size; ++local)
        {
            const std::uint32_t subpop = local / npc;
            const std::uint32_t nid = local % npc;
            const std::uint32_t src_ens = ensemble_first[sp] + subpop;
            const auto slot = synapse_slot(role_for(src_ens));
            for (const auto &syn : net->outgoing(p.first + local))
            {
                const std::uint32_t tp = net->projection_target[syn.projection];
                const auto &tpop = net->populations[tp];
                const std::uint32_t tl = syn.target - tpop.first;
                const std::uint32_t f = ensemble_first[tp] + tl / npc;
                SynapticWord w;
                w.weight = weights.scale(sp, tp).quantize(syn.weight_pa);
                w.delay = static_cast<std::uint8_t>(syn.delay_steps);
                w.type = p.polarity == Polarity::inhibitory ? 1 : 0;
                w.target = static_cast<std::uint8_t>(tl % npc);
                rows_for(f * kSynapseRoles + slot, sp)[subpop * kMaxNeuronsPerCore + nid]
                        .push_back(w.encode());
            }
        }
    }

    for (std::uint32_t f = 0; f < pl.ensembles.size(); ++f)
    {
        const auto &ens = pl.ensembles[f];
        const auto &placed = pl.placed[f];
        const double writers =
                static_cast<double>(roster.at(placed.chip).size() * kSynapseRoles);
        for (std::size_t slot = 0; slot < kSynapseRoles; ++slot)
        {
            const auto role = static_cast<CoreRole>(
                    slot + static_cast<std::size_t>(CoreRole::synapse_exc_lower));
            SynapticMatrix m;
            for (auto &[src_pop, r] : rows[f * kSynapseRoles + slot])
            {
                std::size_t longest = 0;
                for (const auto &row : r)
                {
                    longest = std::max(longest, row.size());
                }
                MasterPopulationTable::Entry entry;
                PacketKey k;
                k.route_bits = (src_pop << 1) |
                        (role == CoreRole::synapse_exc_upper ? 1u : 0u);
                entry.key = k.encode();
                entry.mask = kRouteKeyMask;
                entry.base = static_cast<std::uint32_t>(m.words.size());
                entry.stride = static_cast<std::uint32_t>(longest + 1);
                entry.scale = weights.scale(src_pop, ens.population);
                for (const auto &row : r)
                {
                    m.words.push_back(static_cast<std::uint32_t>(row.size()));
                    m.words.insert(m.words.end(), row.begin(), row.end());
                    m.words.resize(m.words.size() + longest - row.size(), 0);
                }
                m.table.entries.push_back(entry);
                r.clear();
            }
            std::sort(m.table.entries.begin(), m.table.entries.end(),
                    [](const auto &a, const auto &b) { return a.key < b.key; });
            synapse_cores.emplace_back(CoreAddress{placed.chip, placed.cores[slot + 2]},
                    role, std::move(m), ens.neuron_count, costs, writers);
        }
        if (costs.sdram_write_us(writers) > costs.second_timer_margin_us)
        {
            throw SchedulingError(fmt::format(
                    "synapse write-back on chip ({},{}) takes {:.2f} us, longer "
                    "than the {:.2f} us second-timer margin",
                    placed.chip.x, placed.chip.y, costs.sdram_write_us(writers),
                    costs.second_timer_margin_us));
        }
    }
}

void MachineSimulation::Impl::schedule_timers(std::uint32_t step)
{
    const auto &pl = mapping.placement;
    for (std::uint32_t i = 0; i < pl.ensembles.size(); ++i)
    {
        const auto &placed = pl.placed[i];
        const double t = options.schedule(placed.chip, step);
        push({t, placed.chip, placed.cores[0], 0, EventKind::neuron_timer, 0, i,
                step});
        if (poisson_index[i] >= 0)
        {
            push({t, placed.chip, placed.cores[1], 0, EventKind::poisson_timer, 0,
                    static_cast<std::uint32_t>(poisson_index[i]), step});
        }
        for (std::size_t slot = 0; slot < kSynapseRoles; ++slot)
        {
            push({t, placed.chip, placed.cores[slot + 2], 0,
                    EventKind::window_open, 0,
                    static_cast<std::uint32_t>(i * kSynapseRoles + slot), step});
        }
    }
}

void MachineSimulation::Impl::handle(const Event &e)
{
    switch (e.kind)
    {
    case EventKind::window_open:
    {
        auto &core = synapse_cores[e.target];
        core.open_window(e.step, e.time);
        core.advance(e.time);
        push({core.deadline_us(), e.chip, e.core, 0, EventKind::deadline, 0,
                e.target, e.step});
        break;
    }
    case EventKind::packet:
    {
        auto &core = synapse_cores[e.target];
        core.advance(e.time);
        core.receive({e.time, e.key, e.step});
        core.advance(e.time);
        break;
    }
    case EventKind::deadline:
    {
        auto &core = synapse_cores[e.target];
        const ProfileRecord r = core.close_window();
        summary.received += r.received;
        summary.processed += r.processed;
        summary.flushed += r.flushed;
        summary.zero_target += r.zero_target;
        summary.kickstarts += r.kickstarts;
        summary.cross_timestep += r.cross_timestep;
        summary.events_processed += r.events_processed;
        summary.events_flushed += r.events_flushed;
        summary.max_flushed_in_step = std::max(summary.max_flushed_in_step, r.flushed);
        summary.max_received_in_step =
                std::max(summary.max_received_in_step, r.received);
        summary.max_synapse_busy_us = std::max(summary.max_synapse_busy_us, r.busy_us);
        if (options.keep_profiles)
        {
            profiles.push_back(r);
        }
        break;
    }
    case EventKind::poisson_timer:
    {
        const auto r = poisson_cores[e.target].step(e.step);
        summary.poisson_saturations += r.saturations;
        break;
    }
    case EventKind::neuron_timer:
    {
        const std::uint32_t ens_index = e.target;
        const auto &ens = mapping.placement.ensembles[ens_index];
        std::fill(input.begin(), input.end(), 0.0);
        for (std::size_t slot = 0; slot < kSynapseRoles; ++slot)
        {
            const auto written =
                    synapse_cores[ens_index * kSynapseRoles + slot].written_input(e.step);
            for (std::uint32_t n = 0; n < ens.neuron_count; ++n)
            {
                input[n] += written[n];
            }
        }
        if (poisson_index[ens_index] >= 0)
        {
            const auto &pc = poisson_cores[static_cast<std::size_t>(poisson_index[ens_index])];
            const auto buf = pc.buffer_for(e.step);
            for (std::uint32_t n = 0; n < ens.neuron_count; ++n)
            {
                input[n] += pc.scale().value(buf[n]);
            }
        }
        const auto result = neuron_cores[ens_index].step(e.time,
                std::span<const double>(input.data(), ens.neuron_count));
        summary.max_neuron_busy_us = std::max(summary.max_neuron_busy_us, result.busy_us);
        const auto &pop = net->populations[ens.population];
        const std::uint32_t base_key = mapping.keys.base_key[ens_index];
        for (const auto &s : result.spikes)
        {
            ++summary.spikes;
            trace.events.push_back({e.step, ens.population,
                    ens.first_neuron + s.local_index - pop.first});
            for (const auto &r : routes[ens_index])
            {
                const auto &sc = synapse_cores[r.synapse_core];
                push({s.send_us + r.latency_us, sc.address().chip,
                        sc.address().core, base_key | s.local_index,
                        EventKind::packet, 0, r.synapse_core, e.step});
                ++summary.packets_sent;
            }
        }
        if (e.step + 1 < limit)
        {
            // Each ensemble re-arms all of its cores' timers at once.
            const auto &placed = mapping.placement.placed[ens_index];
            const double t = options.schedule(placed.chip, e.step + 1);
            push({t, placed.chip, placed.cores[0], 0, EventKind::neuron_timer, 0,
                    ens_index, e.step + 1});
            if (poisson_index[ens_index] >= 0)
            {
                push({t, placed.chip, placed.cores[1], 0, EventKind::poisson_timer,
                        0, static_cast<std::uint32_t>(poisson_index[ens_index]),
                        e.step + 1});
            }
            for (std::size_t slot = 0; slot < kSynapseRoles; ++slot)
            {
                push({t, placed.chip, placed.cores[slot + 2], 0,
                        EventKind::window_open, 0,
                        static_cast<std::uint32_t>(ens_index * kSynapseRoles + slot),
                        e.step + 1});
            }
        }
        break;
    }
    }
}

MachineSimulation::MachineSimulation(const NetworkModel &net,
        const MachineSpec &machine, const CostModel &costs,
        RuntimeOptions options)
        : impl_(std::make_unique<Impl>())
{
    if (!(options.slowdown >= 1.0) || !std::isfinite(options.slowdown))
    {
        throw SpecError(fmt::format("slow-down multiplier must be >= 1, got {}",
                options.slowdown));
    }
    impl_->net = &net;
    impl_->machine = machine;
    impl_->costs = costs;
    impl_->options = std::move(options);
    impl_->build();
}

MachineSimulation::~MachineSimulation() = default;

void MachineSimulation::step_machine()
{
    auto &im = *impl_;
    while (!im.queue.empty() && im.queue.top().step <= im.current)
    {
        const Event e = im.queue.top();
        im.queue.pop();
        im.handle(e);
    }
    ++im.current;
    ++im.summary.steps;
    im.trace.duration_ms = im.summary.steps * im.net->dt_ms;
}

HardwareRun MachineSimulation::run(std::uint32_t steps)
{
    auto &im = *impl_;
    if (im.current != 0)
    {
        throw std::logic_error("run() must start from step 0");
    }
    im.limit = steps;
    while (im.current < steps)
    {
        step_machine();
    }
    HardwareRun out;
    out.trace = im.trace;
    out.trace.sort();
    out.profiles = im.profiles;
    out.summary = im.summary;
    return out;
}

std::uint32_t MachineSimulation::step() const
{
    return impl_->current;
}

const Mapping &MachineSimulation::mapping() const
{
    return impl_->mapping;
}

const SpikeTrace &MachineSimulation::trace() const
{
    return impl_->trace;
}

const RunSummary &MachineSimulation::summary() const
{
    return impl_->summary;
}

std::span<const ProfileRecord> MachineSimulation::profiles() const
{
    return impl_->profiles;
}

std::span<const SynapseCore> MachineSimulation::synapse_cores() const
{
    return impl_->synapse_cores;
}

HardwareRun run_hardware(const NetworkModel &net, const MachineSpec &machine,
        const CostModel &costs, const RuntimeOptions &options,
        std::uint32_t steps)
{
    MachineSimulation sim(net, machine, costs, options);
    return sim.run(steps);
}

} // namespace ensim
