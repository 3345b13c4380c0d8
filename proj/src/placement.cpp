#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "ensim/hardware.hpp"

namespace ensim {

std::string_view to_string(CoreRole role)
{
    switch (role)
    {
    case CoreRole::neuron:
        return "neuron";
    case CoreRole::poisson:
        return "poisson";
    case CoreRole::synapse_exc_lower:
        return "synapse_exc_lower";
    case CoreRole::synapse_exc_upper:
        return "synapse_exc_upper";
    case CoreRole::synapse_inh:
        return "synapse_inh";
    }
    return "?";
}

std::uint32_t PacketKey::encode() const
{
    return (route_bits << kRouteShift) | (subpop_index << kSubpopShift) |
            (neuron_id & kNeuronMask);
}

PacketKey PacketKey::decode(std::uint32_t key)
{
    PacketKey k;
    k.neuron_id = key & kNeuronMask;
    k.subpop_index = (key >> kSubpopShift) & (kMaxSubpops - 1);
    k.route_bits = key >> kRouteShift;
    return k;
}

std::vector<PopulationShape> population_shapes(const NetworkModel &net)
{
    std::vector<PopulationShape> out;
    for (const auto &p : net.populations)
    {
        out.push_back({p.name, p.size, p.polarity,
                std::holds_alternative<PoissonInput>(p.background)});
    }
    return out;
}

std::vector<PopulationShape> population_shapes(const NetworkSpec &spec)
{
    std::vector<PopulationShape> out;
    for (const auto &p : spec.populations)
    {
        out.push_back({p.name, p.size, p.polarity,
                spec.simulation.input == InputVariant::poisson});
    }
    return out;
}

std::vector<Ensemble> partition(const std::vector<PopulationShape> &pops,
        std::uint32_t neurons_per_core)
{
    if (neurons_per_core < 1 || neurons_per_core > kMaxNeuronsPerCore)
    {
        throw KeyAllocationError(fmt::format(
                "neurons per core {} outside [1, {}]", neurons_per_core,
                kMaxNeuronsPerCore));
    }
    std::vector<Ensemble> out;
    std::uint32_t first = 0;
    for (std::uint32_t pi = 0; pi < pops.size(); ++pi)
    {
        const auto &p = pops[pi];
        const std::uint32_t nsub =
                (p.size + neurons_per_core - 1) / neurons_per_core;
        if (nsub > kMaxSubpops)
        {
            throw KeyAllocationError(fmt::format(
                    "population '{}' needs {} sub-populations, key field "
                    "holds {}",
                    p.name, nsub, kMaxSubpops));
        }
        const std::uint32_t lower = (nsub + 1) / 2;
        for (std::uint32_t s = 0; s < nsub; ++s)
        {
            Ensemble e;
            e.population = pi;
            e.subpop = s;
            e.subpop_count = nsub;
            e.first_neuron = first + s * neurons_per_core;
            e.neuron_count = std::min(neurons_per_core,
                    p.size - s * neurons_per_core);
            e.has_poisson = p.poisson_background;
            e.upper_half = p.polarity == Polarity::excitatory && s >= lower;
            out.push_back(e);
        }
        first += p.size;
    }
    return out;
}

std::vector<Ensemble> partition(const NetworkModel &net,
        std::uint32_t neurons_per_core)
{
    return partition(population_shapes(net), neurons_per_core);
}

std::size_t Placement::cores_used() const
{
    std::size_t n = 0;
    for (const auto &e : ensembles)
    {
        n += e.core_count();
    }
    return n;
}

std::map<ChipCoord, std::vector<std::size_t>> Placement::roster() const
{
    std::map<ChipCoord, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < placed.size(); ++i)
    {
        out[placed[i].chip].push_back(i);
    }
    return out;
}

std::size_t Placement::max_ensembles_per_chip() const
{
    std::size_t best = 0;
    for (const auto &[chip, list] : roster())
    {
        best = std::max(best, list.size());
    }
    return best;
}

std::vector<ChipCoord> spiral_order(const MachineSpec &m)
{
    struct Keyed
    {
        int ring;
        double angle;
        ChipCoord chip;
    };
    std::vector<Keyed> chips;
    const ChipCoord origin{0, 0};
    for (int y = 0; y < m.height; ++y)
    {
        for (int x = 0; x < m.width; ++x)
        {
            const ChipCoord c{x, y};
            // Unwrap y so chips just "below" the origin sit at negative y.
            int yy = y;
            if (m.wrap_vertical && y > m.height / 2)
            {
                yy = y - m.height;
            }
            const double cx = x - 0.5 * yy;
            const double cy = yy * std::numbers::sqrt3 / 2.0;
            double angle = std::atan2(cy, cx);
            if (angle < 0.0)
            {
                angle += 2.0 * std::numbers::pi;
            }
            chips.push_back({hex_distance(m, origin, c), angle, c});
        }
    }
    std::sort(chips.begin(), chips.end(), [](const Keyed &a, const Keyed &b) {
        if (a.ring != b.ring)
            return a.ring < b.ring;
        if (a.angle != b.angle)
            return a.angle < b.angle;
        return a.chip < b.chip;
    });
    std::vector<ChipCoord> out;
    out.reserve(chips.size());
    for (const auto &k : chips)
    {
        out.push_back(k.chip);
    }
    return out;
}

Placement place_radial(std::vector<Ensemble> ensembles, const MachineSpec &m)
{
    m.validate();
    Placement p;
    p.ensembles = std::move(ensembles);
    p.placed.resize(p.ensembles.size());

    const auto order = spiral_order(m);
    std::size_t next = 0;
    for (const ChipCoord chip : order)
    {
        if (next == p.ensembles.size())
        {
            break;
        }
        const auto cores = m.usable_cores(chip);
        std::size_t used = 0;
        bool any = false;
        while (next < p.ensembles.size() &&
                used + p.ensembles[next].core_count() <= cores.size())
        {
            const Ensemble &e = p.ensembles[next];
            PlacedEnsemble &pe = p.placed[next];
            pe.chip = chip;
            for (std::size_t r = 0; r < kCoreRoleCount; ++r)
            {
                if (static_cast<CoreRole>(r) == CoreRole::poisson &&
                        !e.has_poisson)
                {
                    continue;
                }
                pe.cores[r] = cores[used++];
            }
            any = true;
            ++next;
        }
        if (any)
        {
            p.chips.push_back(chip);
        }
    }
    if (next < p.ensembles.size())
    {
        const Ensemble &e = p.ensembles[next];
        throw PlacementError(fmt::format(
                "machine capacity exhausted: ensemble {} (population {}, "
                "sub-population {}) could not be placed",
                next, e.population, e.subpop));
    }
    return p;
}

std::string serialize_placement(const Placement &p,
        const std::vector<PopulationShape> &pops)
{
    std::string out = "# x y core role population subpop first_neuron "
                      "neurons\n";
    for (std::size_t i = 0; i < p.ensembles.size(); ++i)
    {
        const auto &e = p.ensembles[i];
        const auto &pe = p.placed[i];
        for (std::size_t r = 0; r < kCoreRoleCount; ++r)
        {
            if (pe.cores[r] < 0)
            {
                continue;
            }
            out += fmt::format("{} {} {} {} {} {} {} {}\n", pe.chip.x,
                    pe.chip.y, pe.cores[r],
                    to_string(static_cast<CoreRole>(r)),
                    pops[e.population].name, e.subpop, e.first_neuron,
                    e.neuron_count);
        }
    }
    return out;
}

KeyAllocation allocate_keys(const Placement &placement,
        const std::vector<PopulationShape> &pops)
{
    if (pops.size() > (1u << (kRouteBits - 1)))
    {
        throw KeyAllocationError(fmt::format(
                "{} populations exceed the route-bit field", pops.size()));
    }
    KeyAllocation keys;
    keys.base_key.reserve(placement.ensembles.size());
    for (const auto &e : placement.ensembles)
    {
        if (e.subpop >= kMaxSubpops || e.neuron_count > kMaxNeuronsPerCore)
        {
            throw KeyAllocationError(fmt::format(
                    "ensemble of population {} overflows key fields "
                    "(sub-population {}, {} neurons)",
                    e.population, e.subpop, e.neuron_count));
        }
        PacketKey k;
        k.route_bits = (e.population << 1) | (e.upper_half ? 1u : 0u);
        k.subpop_index = e.subpop;
        keys.base_key.push_back(k.encode());
    }
    return keys;
}

ConnectivitySummary connectivity_summary(const NetworkModel &net)
{
    ConnectivitySummary c;
    for (std::size_t i = 0; i < net.projections.size(); ++i)
    {
        const std::pair<std::uint32_t, std::uint32_t> pr{
                net.projection_source[i], net.projection_target[i]};
        if (std::find(c.projections.begin(), c.projections.end(), pr) ==
                c.projections.end())
        {
            c.projections.push_back(pr);
        }
    }
    return c;
}

ConnectivitySummary connectivity_summary(const NetworkSpec &spec)
{
    auto index = [&](const std::string &name) {
        for (std::uint32_t i = 0; i < spec.populations.size(); ++i)
        {
            if (spec.populations[i].name == name)
                return i;
        }
        throw SpecError(fmt::format("unknown population '{}'", name));
    };
    ConnectivitySummary c;
    for (const auto &p : spec.projections)
    {
        const std::pair pr{index(p.source), index(p.target)};
        if (std::find(c.projections.begin(), c.projections.end(), pr) ==
                c.projections.end())
        {
            c.projections.push_back(pr);
        }
    }
    return c;
}

std::vector<CoreAddress> destination_cores(const Placement &placement,
        const std::vector<PopulationShape> &pops,
        const ConnectivitySummary &conn, std::size_t source_ensemble)
{
    const Ensemble &src = placement.ensembles[source_ensemble];
    const bool exc = pops[src.population].polarity == Polarity::excitatory;
    const CoreRole role = exc ? (src.upper_half ? CoreRole::synapse_exc_upper
                                                : CoreRole::synapse_exc_lower)
                              : CoreRole::synapse_inh;
    std::vector<CoreAddress> out;
    for (const auto &[from, to] : conn.projections)
    {
        if (from != src.population)
        {
            continue;
        }
        for (std::size_t i = 0; i < placement.ensembles.size(); ++i)
        {
            if (placement.ensembles[i].population != to)
            {
                continue;
            }
            const auto &pe = placement.placed[i];
            out.push_back({pe.chip, pe.cores[static_cast<std::size_t>(role)]});
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace ensim
