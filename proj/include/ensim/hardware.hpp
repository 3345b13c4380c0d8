#pragma once

// Virtual machine model: chips on a triangular (six-link) mesh with optional
// vertical wrap, multicast routers, plus the host-side mapping steps that
// partition a network into core ensembles, place them radially, allocate
// packet keys and generate routing tables.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ensim/network.hpp"

namespace ensim {

class HardwareError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class PlacementError : public HardwareError
{
public:
    using HardwareError::HardwareError;
};

class KeyAllocationError : public HardwareError
{
public:
    using HardwareError::HardwareError;
};

class RoutingError : public HardwareError
{
public:
    using HardwareError::HardwareError;
};

struct ChipCoord
{
    int x{0};
    int y{0};
    auto operator<=>(const ChipCoord &) const = default;
};

struct CoreAddress
{
    ChipCoord chip;
    int core{0};
    auto operator<=>(const CoreAddress &) const = default;
};

enum class Link : std::uint8_t
{
    east = 0,
    north_east = 1,
    north = 2,
    west = 3,
    south_west = 4,
    south = 5,
};

inline constexpr std::array<Link, 6> kAllLinks{Link::east, Link::north_east,
        Link::north, Link::west, Link::south_west, Link::south};

std::string_view to_string(Link link);
Link opposite(Link link);

struct MachineSpec
{
    int width{24};
    int height{24};
    bool wrap_vertical{true};
    int board_width{8};
    int board_height{6};
    int cores_per_chip{18};
    int usable_cores_per_chip{16};
    double router_hop_latency_ns{500.0};
    double board_link_latency_ns{900.0};
    std::uint64_t sdram_bytes{128ULL << 20};
    std::uint64_t dtcm_bytes{64ULL << 10};
    std::size_t routing_entry_limit{1024};
    double drift_bound_ppm{100.0};
    double drift_spread_ppm{20.0};
    std::vector<CoreAddress> dead_cores;

    void validate() const;

    [[nodiscard]] int boards() const;
    [[nodiscard]] int board_of(ChipCoord c) const;
    [[nodiscard]] bool contains(ChipCoord c) const;
    [[nodiscard]] std::optional<ChipCoord> neighbour(ChipCoord c,
            Link link) const;
    // Application cores available on a chip, ascending; core 0 is the
    // monitor and the last core is reserved for the system.
    [[nodiscard]] std::vector<int> usable_cores(ChipCoord c) const;
    [[nodiscard]] int chip_count() const { return width * height; }
};

MachineSpec parse_machine_spec(std::string_view text);
MachineSpec load_machine_spec(const std::string &path);
std::string serialize_machine_spec(const MachineSpec &spec);

// Minimal link hops between two chips, honouring vertical wrap.
int hex_distance(const MachineSpec &m, ChipCoord a, ChipCoord b);

// Modelled transit latency of a route: one router per hop plus the extra
// cost of every hop that crosses a board boundary.
struct RouteCost
{
    int hops{0};
    int board_crossings{0};
    [[nodiscard]] double latency_ns(const MachineSpec &m) const
    {
        return hops * m.router_hop_latency_ns +
                board_crossings * m.board_link_latency_ns;
    }
};

// Deterministic breadth-first shortest-path tree over the whole machine.
struct ShortestPathTree
{
    ChipCoord root;
    // Indexed by y * width + x; link used to reach the chip from its parent.
    std::vector<std::optional<Link>> via;
    std::vector<RouteCost> cost;

    [[nodiscard]] std::optional<ChipCoord> parent(const MachineSpec &m,
            ChipCoord c) const;
};

ShortestPathTree shortest_path_tree(const MachineSpec &m, ChipCoord root);

// ---------------------------------------------------------------------------
// Packet keys: [31:15] route bits, [14:6] sub-population, [5:0] neuron.

inline constexpr std::uint32_t kNeuronBits = 6;
inline constexpr std::uint32_t kSubpopBits = 9;
inline constexpr std::uint32_t kRouteBits = 17;
inline constexpr std::uint32_t kMaxNeuronsPerCore = 1u << kNeuronBits;
inline constexpr std::uint32_t kMaxSubpops = 1u << kSubpopBits;
inline constexpr std::uint32_t kNeuronMask = kMaxNeuronsPerCore - 1;
inline constexpr std::uint32_t kSubpopShift = kNeuronBits;
inline constexpr std::uint32_t kRouteShift = kNeuronBits + kSubpopBits;
inline constexpr std::uint32_t kCoreKeyMask = ~kNeuronMask;
inline constexpr std::uint32_t kRouteKeyMask = ~((1u << kRouteShift) - 1);

struct PacketKey
{
    std::uint32_t neuron_id{0};
    std::uint32_t subpop_index{0};
    std::uint32_t route_bits{0};

    [[nodiscard]] std::uint32_t encode() const;
    static PacketKey decode(std::uint32_t key);
    bool operator==(const PacketKey &) const = default;
};

// Route bits: population index above a one-bit half selector that steers
// excitatory sources to the lower or upper excitatory synapse core.
inline constexpr std::uint32_t kHalfBit = 1u << kRouteShift;
inline constexpr std::uint32_t kPopulationKeyMask = ~((1u << (kRouteShift + 1)) - 1);

// ---------------------------------------------------------------------------
// Partitioning into ensembles.

enum class CoreRole : std::uint8_t
{
    neuron = 0,
    poisson = 1,
    synapse_exc_lower = 2,
    synapse_exc_upper = 3,
    synapse_inh = 4,
};
inline constexpr std::size_t kCoreRoleCount = 5;

std::string_view to_string(CoreRole role);

struct Ensemble
{
    std::uint32_t population{0};
    std::uint32_t subpop{0};
    std::uint32_t subpop_count{1}; // of the owning population
    std::uint32_t first_neuron{0}; // global neuron index
    std::uint32_t neuron_count{0};
    bool has_poisson{false};
    bool upper_half{false}; // excitatory source half this sub-population is in

    [[nodiscard]] std::size_t core_count() const { return has_poisson ? 5 : 4; }
};

struct PopulationShape
{
    std::string name;
    std::uint32_t size{0};
    Polarity polarity{Polarity::excitatory};
    bool poisson_background{false};
};

std::vector<PopulationShape> population_shapes(const NetworkModel &net);
std::vector<PopulationShape> population_shapes(const NetworkSpec &spec);

std::vector<Ensemble> partition(const std::vector<PopulationShape> &pops,
        std::uint32_t neurons_per_core = kMaxNeuronsPerCore);
std::vector<Ensemble> partition(const NetworkModel &net,
        std::uint32_t neurons_per_core = kMaxNeuronsPerCore);

// ---------------------------------------------------------------------------
// Placement.

struct PlacedEnsemble
{
    ChipCoord chip;
    // Core id per CoreRole; -1 when the role is absent (no Poisson core).
    std::array<int, kCoreRoleCount> cores{-1, -1, -1, -1, -1};
};

struct Placement
{
    std::vector<Ensemble> ensembles;
    std::vector<PlacedEnsemble> placed; // parallel to ensembles
    std::vector<ChipCoord> chips;       // occupied chips in fill order

    [[nodiscard]] std::size_t cores_used() const;
    [[nodiscard]] std::map<ChipCoord, std::vector<std::size_t>> roster() const;
    [[nodiscard]] std::size_t max_ensembles_per_chip() const;
};

// Chips of the machine in outward spiral order from (0, 0).
std::vector<ChipCoord> spiral_order(const MachineSpec &m);

Placement place_radial(std::vector<Ensemble> ensembles, const MachineSpec &m);

std::string serialize_placement(const Placement &p,
        const std::vector<PopulationShape> &pops);

// ---------------------------------------------------------------------------
// Keys and routing.

struct KeyAllocation
{
    // Base key (neuron bits zero) of each ensemble's neuron core.
    std::vector<std::uint32_t> base_key;

    [[nodiscard]] std::uint32_t key_of(std::size_t ensemble,
            std::uint32_t local_neuron) const
    {
        return base_key[ensemble] | local_neuron;
    }
};

KeyAllocation allocate_keys(const Placement &placement,
        const std::vector<PopulationShape> &pops);

// Population-level projections; a declared projection routes every spike of
// its source population to the matching synapse core of every target
// ensemble, whether or not any synapse was sampled.
struct ConnectivitySummary
{
    std::vector<std::pair<std::uint32_t, std::uint32_t>> projections;
};

ConnectivitySummary connectivity_summary(const NetworkModel &net);
ConnectivitySummary connectivity_summary(const NetworkSpec &spec);

// Synapse cores a source ensemble's spikes must reach.
std::vector<CoreAddress> destination_cores(const Placement &placement,
        const std::vector<PopulationShape> &pops,
        const ConnectivitySummary &conn, std::size_t source_ensemble);

struct RoutingEntry
{
    std::uint32_t key{0};
    std::uint32_t mask{0};
    std::uint8_t links{0};  // bit per Link
    std::uint32_t cores{0}; // bit per core id
    bool operator==(const RoutingEntry &) const = default;
};

struct RoutingTables
{
    std::map<ChipCoord, std::vector<RoutingEntry>> tables;

    [[nodiscard]] const RoutingEntry *lookup(ChipCoord chip,
            std::uint32_t key) const;
    [[nodiscard]] std::size_t max_entries() const;
    [[nodiscard]] std::size_t total_entries() const;
};

RoutingTables build_routing_tables(const MachineSpec &m,
        const Placement &placement, const KeyAllocation &keys,
        const std::vector<PopulationShape> &pops,
        const ConnectivitySummary &conn);

struct Delivery
{
    CoreAddress core;
    RouteCost cost;
};

// Walks a packet through the routers from its source chip. Packets that
// match no entry continue straight on (default route); a packet without a
// match on its source chip, or one caught in a loop, raises RoutingError.
std::vector<Delivery> route_packet(const MachineSpec &m,
        const RoutingTables &tables, ChipCoord source, std::uint32_t key);

std::string serialize_routing_tables(const RoutingTables &tables);

} // namespace ensim
