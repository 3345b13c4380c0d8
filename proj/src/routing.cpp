#include <algorithm>
#include <bit>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "ensim/hardware.hpp"

namespace ensim {

namespace {

std::uint8_t link_bit(Link l)
{
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(l));
}

// Pairs entries whose keys differ in exactly one masked bit and whose targets
// agree, widening the mask. Only exact halves are merged, so the merged set
// matches precisely the keys the inputs matched.
void merge_entries(std::vector<RoutingEntry> &entries)
{
    bool changed = true;
    while (changed)
    {
        changed = false;
        for (std::uint32_t bit = 0; bit < 32; ++bit)
        {
            const std::uint32_t b = 1u << bit;
            using Sig = std::tuple<std::uint32_t, std::uint32_t, std::uint8_t,
                    std::uint32_t>;
            std::map<Sig, std::size_t> seen;
            std::vector<bool> dead(entries.size(), false);
            std::vector<RoutingEntry> merged;
            for (std::size_t i = 0; i < entries.size(); ++i)
            {
                const auto &e = entries[i];
                if (!(e.mask & b))
                {
                    continue;
                }
                const Sig sig{e.key & ~b, e.mask, e.links, e.cores};
                const auto it = seen.find(sig);
                if (it == seen.end())
                {
                    seen.emplace(sig, i);
                    continue;
                }
                if (dead[it->second] || entries[it->second].key == e.key)
                {
                    continue;
                }
                dead[it->second] = true;
                dead[i] = true;
                merged.push_back({e.key & ~b, e.mask & ~b, e.links, e.cores});
                seen.erase(it);
            }
            if (merged.empty())
            {
                continue;
            }
            changed = true;
            std::vector<RoutingEntry> next;
            for (std::size_t i = 0; i < entries.size(); ++i)
            {
                if (!dead[i])
                {
                    next.push_back(entries[i]);
                }
            }
            next.insert(next.end(), merged.begin(), merged.end());
            entries = std::move(next);
        }
    }
}

} // namespace

const RoutingEntry *RoutingTables::lookup(ChipCoord chip,
        std::uint32_t key) const
{
    const auto it = tables.find(chip);
    if (it == tables.end())
    {
        return nullptr;
    }
    for (const auto &e : it->second)
    {
        if ((key & e.mask) == e.key)
        {
            return &e;
        }
    }
    return nullptr;
}

std::size_t RoutingTables::max_entries() const
{
    std::size_t best = 0;
    for (const auto &[chip, t] : tables)
    {
        best = std::max(best, t.size());
    }
    return best;
}

std::size_t RoutingTables::total_entries() const
{
    std::size_t n = 0;
    for (const auto &[chip, t] : tables)
    {
        n += t.size();
    }
    return n;
}

RoutingTables build_routing_tables(const MachineSpec &m,
        const Placement &placement, const KeyAllocation &keys,
        const std::vector<PopulationShape> &pops,
        const ConnectivitySummary &conn)
{
    std::map<ChipCoord, ShortestPathTree> trees;
    const auto tree_of = [&](ChipCoord root) -> const ShortestPathTree & {
        auto it = trees.find(root);
        if (it == trees.end())
        {
            it = trees.emplace(root, shortest_path_tree(m, root)).first;
        }
        return it->second;
    };
    const auto idx = [&](ChipCoord c) {
        return static_cast<std::size_t>(c.y * m.width + c.x);
    };

    RoutingTables out;
    for (std::size_t e = 0; e < placement.ensembles.size(); ++e)
    {
        const auto dests = destination_cores(placement, pops, conn, e);
        if (dests.empty())
        {
            continue;
        }
        const ChipCoord root = placement.placed[e].chip;
        const auto &tree = tree_of(root);

        std::map<ChipCoord, std::uint32_t> cores;
        std::map<ChipCoord, std::uint8_t> links;
        for (const auto &d : dests)
        {
            cores[d.chip] |= 1u << d.core;
        }
        std::set<ChipCoord> on_tree{root};
        for (const auto &[chip, mask] : cores)
        {
            ChipCoord c = chip;
            while (!on_tree.contains(c))
            {
                on_tree.insert(c);
                const auto parent = tree.parent(m, c);
                if (!parent)
                {
                    throw RoutingError(fmt::format(
                            "chip ({},{}) unreachable from ({},{})", c.x, c.y,
                            root.x, root.y));
                }
                links[*parent] |= link_bit(*tree.via[idx(c)]);
                c = *parent;
            }
        }

        for (const ChipCoord chip : on_tree)
        {
            const std::uint8_t l = links.contains(chip) ? links[chip] : 0;
            const std::uint32_t c = cores.contains(chip) ? cores[chip] : 0;
            if (chip != root && c == 0 && std::popcount(l) == 1 &&
                    l == link_bit(*tree.via[idx(chip)]))
            {
                continue; // default routing carries it straight through
            }
            out.tables[chip].push_back(
                    {keys.base_key[e], kCoreKeyMask, l, c});
        }
    }

    for (auto &[chip, table] : out.tables)
    {
        merge_entries(table);
        std::sort(table.begin(), table.end(),
                [](const RoutingEntry &a, const RoutingEntry &b) {
                    const int pa = std::popcount(a.mask);
                    const int pb = std::popcount(b.mask);
                    if (pa != pb)
                        return pa > pb;
                    return a.key < b.key;
                });
        if (table.size() > m.routing_entry_limit)
        {
            throw RoutingError(fmt::format(
                    "routing table of chip ({},{}) needs {} entries, limit {}",
                    chip.x, chip.y, table.size(), m.routing_entry_limit));
        }
    }
    return out;
}

std::vector<Delivery> route_packet(const MachineSpec &m,
        const RoutingTables &tables, ChipCoord source, std::uint32_t key)
{
    struct Hop
    {
        ChipCoord chip;
        std::optional<Link> arrived;
        RouteCost cost;
    };
    std::vector<Delivery> out;
    std::vector<Hop> pending{{source, std::nullopt, {}}};
    const std::size_t hop_limit = static_cast<std::size_t>(m.chip_count()) * 6;
    std::size_t hops = 0;
    while (!pending.empty())
    {
        const Hop h = pending.back();
        pending.pop_back();
        if (++hops > hop_limit)
        {
            throw RoutingError(fmt::format(
                    "key {:#010x} from ({},{}) loops in the routers", key,
                    source.x, source.y));
        }
        const RoutingEntry *e = tables.lookup(h.chip, key);
        std::uint8_t out_links = 0;
        if (e)
        {
            for (int core = 0; core < 32; ++core)
            {
                if (e->cores & (1u << core))
                {
                    out.push_back({{h.chip, core}, h.cost});
                }
            }
            out_links = e->links;
        }
        else if (h.arrived)
        {
            out_links = link_bit(*h.arrived);
        }
        else
        {
            throw RoutingError(fmt::format(
                    "key {:#010x} has no entry on its source chip ({},{})", key,
                    source.x, source.y));
        }
        for (const Link l : kAllLinks)
        {
            if (!(out_links & link_bit(l)))
            {
                continue;
            }
            const auto nb = m.neighbour(h.chip, l);
            if (!nb)
            {
                throw RoutingError(fmt::format(
                        "key {:#010x} leaves the machine at ({},{}) via {}",
                        key, h.chip.x, h.chip.y, to_string(l)));
            }
            RouteCost c = h.cost;
            ++c.hops;
            if (m.board_of(h.chip) != m.board_of(*nb))
            {
                ++c.board_crossings;
            }
            pending.push_back({*nb, l, c});
        }
    }
    std::sort(out.begin(), out.end(), [](const Delivery &a, const Delivery &b) {
        return a.core < b.core;
    });
    return out;
}

std::string serialize_routing_tables(const RoutingTables &tables)
{
    std::string out = "# x y entry key mask links cores\n";
    for (const auto &[chip, table] : tables.tables)
    {
        for (std::size_t i = 0; i < table.size(); ++i)
        {
            const auto &e = table[i];
            std::string links;
            for (const Link l : kAllLinks)
            {
                if (e.links & link_bit(l))
                {
                    links += links.empty() ? "" : ",";
                    links += to_string(l);
                }
            }
            std::string cores;
            for (int c = 0; c < 32; ++c)
            {
                if (e.cores & (1u << c))
                {
                    cores += cores.empty() ? "" : ",";
                    cores += std::to_string(c);
                }
            }
            out += fmt::format("{} {} {} {:#010x} {:#010x} {} {}\n", chip.x,
                    chip.y, i, e.key, e.mask, links.empty() ? "-" : links,
                    cores.empty() ? "-" : cores);
        }
    }
    return out;
}

} // namespace ensim
