#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ensim/network.hpp"

namespace ensim {

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

std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size())
    {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
        {
            ++i;
        }
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t')
        {
            ++i;
        }
        if (i > start)
        {
            out.push_back(s.substr(start, i - start));
        }
    }
    return out;
}

class LineError
{
public:
    explicit LineError(std::size_t line) : line_(line) {}
    [[noreturn]] void operator()(const std::string &msg) const
    {
        throw SpecError(fmt::format("line {}: {}", line_, msg));
    }

private:
    std::size_t line_;
};

double to_double(std::string_view s, const LineError &err)
{
    // std::from_chars for double is available in libstdc++ 11.
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
    {
        err(fmt::format("expected a number, got '{}'", s));
    }
    return v;
}

std::uint32_t to_uint(std::string_view s, const LineError &err)
{
    std::uint32_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
    {
        err(fmt::format("expected a non-negative integer, got '{}'", s));
    }
    return v;
}

enum class Section
{
    none,
    simulation,
    neuron,
    population,
    projection,
};

void set_neuron_field(NeuronParams &p, std::string_view key, double v,
        const LineError &err)
{
    if (key == "tau_m_ms")
        p.tau_m_ms = v;
    else if (key == "tau_syn_ms")
        p.tau_syn_ms = v;
    else if (key == "e_rest_mv")
        p.e_rest_mv = v;
    else if (key == "r_mohm")
        p.r_mohm = v;
    else if (key == "v_thresh_mv")
        p.v_thresh_mv = v;
    else if (key == "v_reset_mv")
        p.v_reset_mv = v;
    else if (key == "t_ref_ms")
        p.t_ref_ms = v;
    else if (key == "i_dc_pa")
        p.i_dc_pa = v;
    else
        err(fmt::format("unknown neuron parameter '{}'", key));
}

void set_simulation_field(SimulationSpec &s, std::string_view key,
        std::string_view value, const LineError &err)
{
    if (key == "dt_ms")
        s.dt_ms = to_double(value, err);
    else if (key == "input")
    {
        try
        {
            s.input = parse_input_variant(value);
        }
        catch (const SpecError &e)
        {
            err(e.what());
        }
    }
    else if (key == "v_init_mean_mv")
        s.v_init_mean_mv = to_double(value, err);
    else if (key == "v_init_sd_mv")
        s.v_init_sd_mv = to_double(value, err);
    else if (key == "scale_factor")
        s.scale_factor = to_double(value, err);
    else if (key == "connectivity")
    {
        if (value == "pairwise_bernoulli")
            s.connectivity = ConnectivityScheme::pairwise_bernoulli;
        else if (value == "fixed_total_number")
            s.connectivity = ConnectivityScheme::fixed_total_number;
        else
            err(fmt::format("unknown connectivity scheme '{}'", value));
    }
    else
        err(fmt::format("unknown simulation key '{}'", key));
}

} // namespace

NetworkSpec parse_network_spec(std::string_view text)
{
    NetworkSpec spec;
    Section section = Section::none;
    NeuronParams *neuron = nullptr;
    std::size_t line_no = 0;

    std::size_t pos = 0;
    while (pos <= text.size())
    {
        const auto eol = text.find('\n', pos);
        std::string_view line = text.substr(pos,
                eol == std::string_view::npos ? std::string_view::npos
                                              : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        const LineError err(line_no);

        if (const auto hash = line.find('#'); hash != std::string_view::npos)
        {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty())
        {
            continue;
        }

        if (line.front() == '[')
        {
            if (line.back() != ']')
            {
                err("unterminated section header");
            }
            const auto words = split_ws(line.substr(1, line.size() - 2));
            if (words.empty())
            {
                err("empty section header");
            }
            neuron = nullptr;
            if (words[0] == "simulation" && words.size() == 1)
                section = Section::simulation;
            else if (words[0] == "population" && words.size() == 1)
                section = Section::population;
            else if (words[0] == "projection" && words.size() == 1)
                section = Section::projection;
            else if (words[0] == "neuron" && words.size() == 2)
            {
                section = Section::neuron;
                for (const auto &m : spec.neuron_models)
                {
                    if (m.name == words[1])
                    {
                        err(fmt::format("duplicate neuron model '{}'",
                                words[1]));
                    }
                }
                spec.neuron_models.push_back(
                        {std::string(words[1]), NeuronParams{}});
                neuron = &spec.neuron_models.back().params;
            }
            else
                err(fmt::format("unknown section '{}'", line));
            continue;
        }

        switch (section)
        {
        case Section::none:
            err("content outside of a section");
        case Section::simulation:
        case Section::neuron: {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
            {
                err("expected 'key = value'");
            }
            const auto key = trim(line.substr(0, eq));
            const auto value = trim(line.substr(eq + 1));
            if (section == Section::simulation)
                set_simulation_field(spec.simulation, key, value, err);
            else
                set_neuron_field(*neuron, key, to_double(value, err), err);
            break;
        }
        case Section::population: {
            const auto cols = split_ws(line);
            if (cols.size() != 7)
            {
                err(fmt::format("population row needs 7 columns, got {}",
                        cols.size()));
            }
            PopulationSpec p;
            p.name = std::string(cols[0]);
            p.size = to_uint(cols[1], err);
            try
            {
                p.polarity = parse_polarity(cols[2]);
            }
            catch (const SpecError &e)
            {
                err(e.what());
            }
            p.neuron_model = std::string(cols[3]);
            p.poisson.rate_hz = to_double(cols[4], err);
            p.poisson.weight_pa = to_double(cols[5], err);
            p.dc.amplitude_pa = to_double(cols[6], err);
            spec.populations.push_back(std::move(p));
            break;
        }
        case Section::projection: {
            const auto cols = split_ws(line);
            if (cols.size() != 7)
            {
                err(fmt::format("projection row needs 7 columns, got {}",
                        cols.size()));
            }
            ProjectionSpec p;
            p.source = std::string(cols[0]);
            p.target = std::string(cols[1]);
            p.probability = to_double(cols[2], err);
            p.weight_mean_pa = to_double(cols[3], err);
            p.weight_sd_pa = to_double(cols[4], err);
            p.delay_mean_ms = to_double(cols[5], err);
            p.delay_sd_ms = to_double(cols[6], err);
            spec.projections.push_back(std::move(p));
            break;
        }
        }
    }
    spec.validate();
    return spec;
}

NetworkSpec load_network_spec(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw SpecError(fmt::format("cannot open model file '{}'", path));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try
    {
        return parse_network_spec(buf.str());
    }
    catch (const SpecError &e)
    {
        throw SpecError(fmt::format("{}: {}", path, e.what()));
    }
}

std::string serialize_network_spec(const NetworkSpec &spec)
{
    std::string out;
    const auto &s = spec.simulation;
    out += "[simulation]\n";
    out += fmt::format("dt_ms = {}\n", s.dt_ms);
    out += fmt::format("input = {}\n", to_string(s.input));
    out += fmt::format("v_init_mean_mv = {}\n", s.v_init_mean_mv);
    out += fmt::format("v_init_sd_mv = {}\n", s.v_init_sd_mv);
    out += fmt::format("scale_factor = {}\n", s.scale_factor);
    out += fmt::format("connectivity = {}\n",
            s.connectivity == ConnectivityScheme::pairwise_bernoulli
                    ? "pairwise_bernoulli"
                    : "fixed_total_number");
    for (const auto &m : spec.neuron_models)
    {
        const auto &p = m.params;
        out += fmt::format("\n[neuron {}]\n", m.name);
        out += fmt::format("tau_m_ms = {}\n", p.tau_m_ms);
        out += fmt::format("tau_syn_ms = {}\n", p.tau_syn_ms);
        out += fmt::format("e_rest_mv = {}\n", p.e_rest_mv);
        out += fmt::format("r_mohm = {}\n", p.r_mohm);
        out += fmt::format("v_thresh_mv = {}\n", p.v_thresh_mv);
        out += fmt::format("v_reset_mv = {}\n", p.v_reset_mv);
        out += fmt::format("t_ref_ms = {}\n", p.t_ref_ms);
        out += fmt::format("i_dc_pa = {}\n", p.i_dc_pa);
    }
    out += "\n[population]\n";
    out += "# name size polarity neuron poisson_rate_hz poisson_weight_pa "
           "dc_pa\n";
    for (const auto &p : spec.populations)
    {
        out += fmt::format("{} {} {} {} {} {} {}\n", p.name, p.size,
                to_string(p.polarity), p.neuron_model, p.poisson.rate_hz,
                p.poisson.weight_pa, p.dc.amplitude_pa);
    }
    out += "\n[projection]\n";
    out += "# source target probability weight_mean_pa weight_sd_pa "
           "delay_mean_ms delay_sd_ms\n";
    for (const auto &p : spec.projections)
    {
        out += fmt::format("{} {} {} {} {} {} {}\n", p.source, p.target,
                p.probability, p.weight_mean_pa, p.weight_sd_pa,
                p.delay_mean_ms, p.delay_sd_ms);
    }
    return out;
}

} // namespace ensim
