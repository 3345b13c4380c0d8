#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ensim/hardware.hpp"

namespace ensim {

std::string_view to_string(Link link)
{
    switch (link)
    {
    case Link::east:
        return "E";
    case Link::north_east:
        return "NE";
    case Link::north:
        return "N";
    case Link::west:
        return "W";
    case Link::south_west:
        return "SW";
    case Link::south:
        return "S";
    }
    return "?";
}

Link opposite(Link link)
{
    return static_cast<Link>((static_cast<int>(link) + 3) % 6);
}

void MachineSpec::validate() const
{
    const auto fail = [](const std::string &msg) {
        throw SpecError("invalid machine: " + msg);
    };
    if (width < 1 || height < 1)
        fail("width and height must be positive");
    if (board_width < 1 || board_height < 1)
        fail("board tile dimensions must be positive");
    if (cores_per_chip < 3 || cores_per_chip > 32)
        fail("cores_per_chip must lie in [3, 32]");
    if (usable_cores_per_chip < 1 ||
            usable_cores_per_chip > cores_per_chip - 2)
        fail("usable_cores_per_chip must be in [1, cores_per_chip - 2]");
    if (!(router_hop_latency_ns > 0.0) || !(board_link_latency_ns > 0.0))
        fail("latencies must be positive");
    if (routing_entry_limit < 1)
        fail("routing_entry_limit must be positive");
    if (!(drift_bound_ppm >= 0.0) || !(drift_spread_ppm >= 0.0) ||
            drift_spread_ppm > drift_bound_ppm)
        fail("drift spread must lie in [0, drift_bound_ppm]");
    for (const auto &d : dead_cores)
    {
        if (!contains(d.chip) || d.core < 0 || d.core >= cores_per_chip)
            fail(fmt::format("dead core ({},{},{}) outside machine", d.chip.x,
                    d.chip.y, d.core));
    }
}

int MachineSpec::boards() const
{
    const int bx = (width + board_width - 1) / board_width;
    const int by = (height + board_height - 1) / board_height;
    return bx * by;
}

int MachineSpec::board_of(ChipCoord c) const
{
    const int bx = (width + board_width - 1) / board_width;
    return (c.x / board_width) + (c.y / board_height) * bx;
}

bool MachineSpec::contains(ChipCoord c) const
{
    return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
}

std::optional<ChipCoord> MachineSpec::neighbour(ChipCoord c, Link link) const
{
    static constexpr std::array<std::array<int, 2>, 6> kDelta{
            {{1, 0}, {1, 1}, {0, 1}, {-1, 0}, {-1, -1}, {0, -1}}};
    const auto &d = kDelta[static_cast<std::size_t>(link)];
    ChipCoord n{c.x + d[0], c.y + d[1]};
    if (wrap_vertical)
    {
        n.y = (n.y + height) % height;
    }
    if (!contains(n))
    {
        return std::nullopt;
    }
    if (n == c)
    {
        return std::nullopt; // height-1 wrap onto itself
    }
    return n;
}

std::vector<int> MachineSpec::usable_cores(ChipCoord c) const
{
    std::vector<int> out;
    for (int core = 1; core < cores_per_chip - 1 &&
            static_cast<int>(out.size()) < usable_cores_per_chip;
            ++core)
    {
        const bool dead = std::any_of(dead_cores.begin(), dead_cores.end(),
                [&](const CoreAddress &d) {
                    return d.chip == c && d.core == core;
                });
        if (!dead)
        {
            out.push_back(core);
        }
    }
    return out;
}

int hex_distance(const MachineSpec &m, ChipCoord a, ChipCoord b)
{
    const int dx = b.x - a.x;
    const auto dist = [dx](int dy) {
        if ((dx >= 0 && dy >= 0) || (dx <= 0 && dy <= 0))
        {
            return std::max(std::abs(dx), std::abs(dy));
        }
        return std::abs(dx) + std::abs(dy);
    };
    const int dy = b.y - a.y;
    int best = dist(dy);
    if (m.wrap_vertical)
    {
        best = std::min({best, dist(dy - m.height), dist(dy + m.height)});
    }
    return best;
}

std::optional<ChipCoord> ShortestPathTree::parent(const MachineSpec &m,
        ChipCoord c) const
{
    const auto &v = via[static_cast<std::size_t>(c.y * m.width + c.x)];
    if (!v)
    {
        return std::nullopt;
    }
    return m.neighbour(c, opposite(*v));
}

ShortestPathTree shortest_path_tree(const MachineSpec &m, ChipCoord root)
{
    ShortestPathTree t;
    t.root = root;
    const auto n = static_cast<std::size_t>(m.chip_count());
    t.via.assign(n, std::nullopt);
    t.cost.assign(n, RouteCost{-1, 0});
    const auto idx = [&](ChipCoord c) {
        return static_cast<std::size_t>(c.y * m.width + c.x);
    };
    std::deque<ChipCoord> queue{root};
    t.cost[idx(root)] = RouteCost{0, 0};
    while (!queue.empty())
    {
        const ChipCoord c = queue.front();
        queue.pop_front();
        for (const Link link : kAllLinks)
        {
            const auto nb = m.neighbour(c, link);
            if (!nb || t.cost[idx(*nb)].hops >= 0)
            {
                continue;
            }
            RouteCost rc = t.cost[idx(c)];
            ++rc.hops;
            if (m.board_of(c) != m.board_of(*nb))
            {
                ++rc.board_crossings;
            }
            t.cost[idx(*nb)] = rc;
            t.via[idx(*nb)] = link;
            queue.push_back(*nb);
        }
    }
    return t;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
    {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view s, std::size_t line)
{
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
    {
        throw SpecError(fmt::format("line {}: expected a number, got '{}'",
                line, s));
    }
    return v;
}

bool parse_bool(std::string_view s, std::size_t line)
{
    if (s == "true" || s == "1" || s == "yes")
        return true;
    if (s == "false" || s == "0" || s == "no")
        return false;
    throw SpecError(fmt::format("line {}: expected a boolean, got '{}'", line,
            s));
}

} // namespace

MachineSpec parse_machine_spec(std::string_view text)
{
    MachineSpec m;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw))
    {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
        {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty() || line == "[machine]")
        {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
        {
            throw SpecError(fmt::format("line {}: expected 'key = value'",
                    line_no));
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "width")
            m.width = parse_number<int>(value, line_no);
        else if (key == "height")
            m.height = parse_number<int>(value, line_no);
        else if (key == "wrap_vertical")
            m.wrap_vertical = parse_bool(value, line_no);
        else if (key == "board_width")
            m.board_width = parse_number<int>(value, line_no);
        else if (key == "board_height")
            m.board_height = parse_number<int>(value, line_no);
        else if (key == "boards")
        {
            const int expected = parse_number<int>(value, line_no);
            if (expected != m.boards())
            {
                throw SpecError(fmt::format(
                        "line {}: boards = {} but geometry gives {}", line_no,
                        expected, m.boards()));
            }
        }
        else if (key == "cores_per_chip")
            m.cores_per_chip = parse_number<int>(value, line_no);
        else if (key == "usable_cores_per_chip")
            m.usable_cores_per_chip = parse_number<int>(value, line_no);
        else if (key == "router_hop_latency_ns")
            m.router_hop_latency_ns = parse_number<double>(value, line_no);
        else if (key == "board_link_latency_ns")
            m.board_link_latency_ns = parse_number<double>(value, line_no);
        else if (key == "sdram_bytes")
            m.sdram_bytes = parse_number<std::uint64_t>(value, line_no);
        else if (key == "dtcm_bytes")
            m.dtcm_bytes = parse_number<std::uint64_t>(value, line_no);
        else if (key == "routing_entry_limit")
            m.routing_entry_limit = parse_number<std::size_t>(value, line_no);
        else if (key == "drift_bound_ppm")
            m.drift_bound_ppm = parse_number<double>(value, line_no);
        else if (key == "drift_spread_ppm")
            m.drift_spread_ppm = parse_number<double>(value, line_no);
        else if (key == "dead_cores")
        {
            std::istringstream cores{std::string(value)};
            std::string triple;
            while (cores >> triple)
            {
                int x = 0, y = 0, c = 0;
                if (std::sscanf(triple.c_str(), "%d,%d,%d", &x, &y, &c) != 3)
                {
                    throw SpecError(fmt::format(
                            "line {}: dead core '{}' is not x,y,core",
                            line_no, triple));
                }
                m.dead_cores.push_back({{x, y}, c});
            }
        }
        else
            throw SpecError(fmt::format("line {}: unknown machine key '{}'",
                    line_no, key));
    }
    m.validate();
    return m;
}

MachineSpec load_machine_spec(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw SpecError(fmt::format("cannot open machine file '{}'", path));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_machine_spec(buf.str());
}

std::string serialize_machine_spec(const MachineSpec &m)
{
    std::string out = "[machine]\n";
    out += fmt::format("width = {}\nheight = {}\nwrap_vertical = {}\n",
            m.width, m.height, m.wrap_vertical ? "true" : "false");
    out += fmt::format("board_width = {}\nboard_height = {}\n", m.board_width,
            m.board_height);
    out += fmt::format("cores_per_chip = {}\nusable_cores_per_chip = {}\n",
            m.cores_per_chip, m.usable_cores_per_chip);
    out += fmt::format("router_hop_latency_ns = {}\n", m.router_hop_latency_ns);
    out += fmt::format("board_link_latency_ns = {}\n", m.board_link_latency_ns);
    out += fmt::format("sdram_bytes = {}\ndtcm_bytes = {}\n", m.sdram_bytes,
            m.dtcm_bytes);
    out += fmt::format("routing_entry_limit = {}\n", m.routing_entry_limit);
    out += fmt::format("drift_bound_ppm = {}\ndrift_spread_ppm = {}\n",
            m.drift_bound_ppm, m.drift_spread_ppm);
    if (!m.dead_cores.empty())
    {
        out += "dead_cores =";
        for (const auto &d : m.dead_cores)
        {
            out += fmt::format(" {},{},{}", d.chip.x, d.chip.y, d.core);
        }
        out += "\n";
    }
    return out;
}

} // namespace ensim
