#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include <fmt/format.h>

#include "ensim/runtime.hpp"

namespace ensim {

namespace {

using CostField = std::pair<std::string_view, double CostModel::*>;

constexpr std::array<CostField, 13> kCostFields{{
        {"neuron_update_us", &CostModel::neuron_update_us},
        {"neuron_input_read_us", &CostModel::neuron_input_read_us},
        {"spike_single_target_us", &CostModel::spike_single_target_us},
        {"pipeline_kickstart_us", &CostModel::pipeline_kickstart_us},
        {"extra_word_us", &CostModel::extra_word_us},
        {"row_fetch_us", &CostModel::row_fetch_us},
        {"sdram_write_mean_us", &CostModel::sdram_write_mean_us},
        {"sdram_write_max_us", &CostModel::sdram_write_max_us},
        {"writers_at_max", &CostModel::writers_at_max},
        {"poisson_update_us", &CostModel::poisson_update_us},
        {"second_timer_margin_us", &CostModel::second_timer_margin_us},
        {"timer_period_us", &CostModel::timer_period_us},
        {"clock_hz", &CostModel::clock_hz},
}};

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
    {
        return {};
    }
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

} // namespace

void CostModel::validate() const
{
    for (const auto &[name, field] : kCostFields)
    {
        const double v = this->*field;
        const bool may_be_zero = field == &CostModel::row_fetch_us ||
                field == &CostModel::extra_word_us;
        if (!std::isfinite(v) || v < 0.0 || (!may_be_zero && v == 0.0))
        {
            throw SpecError(fmt::format("cost model: {} must be positive, "
                                        "got {}",
                    name, v));
        }
    }
    if (row_fetch_us + extra_word_us >= spike_single_target_us)
    {
        throw SpecError("cost model: row fetch plus one word must be below "
                        "the single-target spike cost");
    }
    if (sdram_write_max_us < sdram_write_mean_us)
    {
        throw SpecError("cost model: sdram_write_max_us below the mean");
    }
    if (!(writers_at_max > 1.0))
    {
        throw SpecError("cost model: writers_at_max must exceed 1");
    }
    if (second_timer_margin_us >= timer_period_us)
    {
        throw SpecError("cost model: second timer margin must be shorter "
                        "than the period");
    }
}

double CostModel::sdram_write_us(double writers) const
{
    const double w = std::max(1.0, writers);
    return sdram_write_mean_us + (sdram_write_max_us - sdram_write_mean_us) *
            (w - 1.0) / (writers_at_max - 1.0);
}

double CostModel::contention_factor(double writers) const
{
    return sdram_write_us(writers) / sdram_write_mean_us;
}

double CostModel::row_cost_us(std::size_t words, double writers) const
{
    const double fixed = spike_single_target_us - extra_word_us - row_fetch_us;
    return fixed + row_fetch_us * contention_factor(writers) +
            extra_word_us * static_cast<double>(words);
}

CostModel parse_cost_model(std::string_view text)
{
    CostModel c;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw))
    {
        ++line_no;
        std::string_view line = raw;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty() || line == "[costs]")
        {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
        {
            throw SpecError(fmt::format("cost file line {}: expected 'key = "
                                        "value'",
                    line_no));
        }
        const auto key = trim(line.substr(0, eq));
        const std::string value(trim(line.substr(eq + 1)));
        const auto it = std::find_if(kCostFields.begin(), kCostFields.end(),
                [&](const CostField &f) { return f.first == key; });
        if (it == kCostFields.end())
        {
            throw SpecError(fmt::format("cost file line {}: unknown key '{}'",
                    line_no, key));
        }
        std::size_t used = 0;
        double v = 0.0;
        try
        {
            v = std::stod(value, &used);
        }
        catch (const std::exception &)
        {
            used = 0;
        }
        if (used != value.size() || value.empty())
        {
            throw SpecError(fmt::format("cost file line {}: bad number '{}'",
                    line_no, value));
        }
        c.*(it->second) = v;
    }
    c.validate();
    return c;
}

CostModel load_cost_model(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw SpecError(fmt::format("cannot open cost file '{}'", path));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_cost_model(buf.str());
}

std::string serialize_cost_model(const CostModel &costs)
{
    std::string out = "[costs]\n";
    for (const auto &[name, field] : kCostFields)
    {
        out += fmt::format("{} = {}\n", name, costs.*field);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::uint32_t SynapticWord::encode() const
{
    return (std::uint32_t{weight} << 16) | (std::uint32_t{delay} << 8) |
            ((std::uint32_t{type} & 0x3u) << 6) | (target & kNeuronMask);
}

SynapticWord SynapticWord::decode(std::uint32_t word)
{
    SynapticWord w;
    w.weight = static_cast<std::uint16_t>(word >> 16);
    w.delay = static_cast<std::uint8_t>((word >> 8) & 0xFF);
    w.type = static_cast<std::uint8_t>((word >> 6) & 0x3);
    w.target = static_cast<std::uint8_t>(word & kNeuronMask);
    return w;
}

std::uint16_t WeightScale::quantize(double magnitude) const
{
    const double scaled = std::ldexp(std::abs(magnitude), exponent);
    const long long q = std::llround(scaled);
    return static_cast<std::uint16_t>(std::clamp<long long>(q, 0, kWeightMax));
}

double WeightScale::value(std::uint32_t stored) const
{
    return std::ldexp(static_cast<double>(stored), -exponent);
}

WeightScale weight_scale_for(double max_magnitude, std::uint32_t limit)
{
    WeightScale s;
    const double m = std::abs(max_magnitude);
    if (!(m > 0.0) || !std::isfinite(m))
    {
        return s;
    }
    int k = std::ilogb(static_cast<double>(limit) / m);
    while (std::ldexp(m, k + 1) <= limit)
    {
        ++k;
    }
    while (std::ldexp(m, k) > limit)
    {
        --k;
    }
    s.exponent = k;
    return s;
}

double QuantisedWeights::contribution(std::size_t source_pop,
        std::size_t target_pop, double weight_pa) const
{
    const double v = scale(source_pop, target_pop).value(
            scale(source_pop, target_pop).quantize(weight_pa));
    return polarity[source_pop] == Polarity::inhibitory ? -v : v;
}

double QuantisedWeights::poisson_input(std::size_t pop, std::uint32_t count,
        bool *saturated) const
{
    std::uint64_t total = std::uint64_t{count} * poisson_weight[pop];
    if (total > kWeightMax)
    {
        total = kWeightMax;
        if (saturated)
            *saturated = true;
    }
    return poisson_scale[pop].value(static_cast<std::uint32_t>(total));
}

QuantisedWeights quantise_weights(const NetworkModel &net)
{
    QuantisedWeights q;
    const std::size_t n = net.populations.size();
    q.populations = n;
    std::vector<double> max_w(n * n, 0.0);
    for (std::size_t sp = 0; sp < n; ++sp)
    {
        const auto &p = net.populations[sp];
        q.polarity.push_back(p.polarity);
        for (std::uint32_t s = p.first; s < p.first + p.size; ++s)
        {
            for (const auto &syn : net.outgoing(s))
            {
                const std::size_t tp = net.projection_target[syn.projection];
                double &m = max_w[sp * n + tp];
                m = std::max(m, std::abs(syn.weight_pa));
            }
        }
        double w = 0.0;
        if (const auto *pi = std::get_if<PoissonInput>(&p.background))
        {
            w = pi->weight_pa;
        }
        const WeightScale ps = weight_scale_for(w, kWeightMax / kPoissonHeadroom);
        q.poisson_scale.push_back(ps);
        q.poisson_weight.push_back(ps.quantize(w));
    }
    for (const double m : max_w)
    {
        q.pair_scale.push_back(weight_scale_for(m));
    }
    return q;
}

// ---------------------------------------------------------------------------

RingBuffer::RingBuffer(std::uint32_t neurons)
        : neurons_(neurons)
        , slots_(std::size_t{kRingSlots} * neurons, 0.0)
{
}

void RingBuffer::add(std::uint32_t step, std::uint32_t delay,
        std::uint32_t target, double value)
{
    if (delay < 1 || delay > kRingSlots || target >= neurons_)
    {
        throw std::out_of_range(fmt::format(
                "ring buffer insert with delay {} for neuron {}", delay,
                target));
    }
    const std::size_t slot = (std::size_t{step} + delay) % kRingSlots;
    slots_[slot * neurons_ + target] += value;
}

void RingBuffer::take(std::uint32_t step, std::span<double> out)
{
    const std::size_t slot = step % kRingSlots;
    double *row = slots_.data() + slot * neurons_;
    for (std::uint32_t i = 0; i < neurons_ && i < out.size(); ++i)
    {
        out[i] = row[i];
    }
    std::fill(row, row + neurons_, 0.0);
}

double RingBuffer::peek(std::uint32_t step, std::uint32_t target) const
{
    return slots_[(step % kRingSlots) * neurons_ + target];
}

const MasterPopulationTable::Entry *MasterPopulationTable::find(
        std::uint32_t key) const
{
    // Entries cover disjoint aligned key ranges: the candidate is the last
    // entry whose key does not exceed the packet key.
    auto it = std::upper_bound(entries.begin(), entries.end(), key,
            [](std::uint32_t k, const Entry &e) { return k < e.key; });
    if (it == entries.begin())
    {
        return nullptr;
    }
    --it;
    return (key & it->mask) == it->key ? &*it : nullptr;
}

std::uint32_t MasterPopulationTable::row_address(const Entry &e,
        std::uint32_t key)
{
    const PacketKey k = PacketKey::decode(key);
    return e.base + (k.subpop_index * kMaxNeuronsPerCore + k.neuron_id) * e.stride;
}

std::span<const std::uint32_t> SynapticMatrix::row(std::uint32_t key) const
{
    const auto *e = table.find(key);
    if (!e)
    {
        return {};
    }
    const std::uint32_t addr = MasterPopulationTable::row_address(*e, key);
    if (addr >= words.size())
    {
        return {};
    }
    return {words.data() + addr + 1, words[addr]};
}

std::string serialize_profiles(std::span<const ProfileRecord> records)
{
    std::string out = "# x y core role step received processed flushed "
                      "zero_target kickstarts cross_timestep events_processed "
                      "events_flushed busy_us\n";
    for (const auto &r : records)
    {
        out += fmt::format("{} {} {} {} {} {} {} {} {} {} {} {} {} {:.3f}\n",
                r.core.chip.x, r.core.chip.y, r.core.core, to_string(r.role),
                r.step, r.received, r.processed, r.flushed, r.zero_target,
                r.kickstarts, r.cross_timestep, r.events_processed,
                r.events_flushed, r.busy_us);
    }
    return out;
}

// ---------------------------------------------------------------------------

SynapseCore::SynapseCore(CoreAddress address, CoreRole role,
        SynapticMatrix matrix, std::uint32_t neurons, const CostModel &costs,
        double writers)
        : address_(address)
        , role_(role)
        , matrix_(std::move(matrix))
        , costs_(&costs)
        , writers_(writers)
        , ring_(neurons)
        , written_(neurons, 0.0)
{
    record_.core = address_;
    record_.role = role_;
}

void SynapseCore::open_window(std::uint32_t step, double open_us)
{
    step_ = step;
    open_us_ = open_us;
    deadline_us_ = open_us + costs_->timer_period_us -
            costs_->second_timer_margin_us;
    window_open_ = true;
    fresh_window_ = true;
    record_.step = step;
}

void SynapseCore::receive(const Packet &packet)
{
    queue_.push_back(packet);
    ++record_.received;
}

void SynapseCore::advance(double time_us)
{
    if (!window_open_)
    {
        return;
    }
    while (head_ < queue_.size())
    {
        const Packet &p = queue_[head_];
        const double start = std::max({p.arrival_us, free_at_us_, open_us_});
        if (start >= deadline_us_ || start > time_us)
        {
            break;
        }
        const bool kick = fresh_window_ || start > free_at_us_;
        const auto row = matrix_.row(p.key);
        const auto *entry = matrix_.table.find(p.key);
        for (const std::uint32_t word : row)
        {
            const SynapticWord w = SynapticWord::decode(word);
            const double v = entry->scale.value(w.weight);
            ring_.add(step_, w.delay, w.target, w.type ? -v : v);
        }
        const double cost = (kick ? costs_->pipeline_kickstart_us : 0.0) +
                costs_->row_cost_us(row.size(), writers_);
        ++record_.processed;
        record_.events_processed += row.size();
        if (row.empty())
            ++record_.zero_target;
        if (kick)
            ++record_.kickstarts;
        if (p.send_step != step_)
            ++record_.cross_timestep;
        record_.busy_us += cost;
        free_at_us_ = start + cost;
        fresh_window_ = false;
        ++head_;
    }
    if (head_ == queue_.size())
    {
        queue_.clear();
        head_ = 0;
    }
    else if (head_ > 4096 && head_ * 2 > queue_.size())
    {
        queue_.erase(queue_.begin(), queue_.begin() + static_cast<long>(head_));
        head_ = 0;
    }
}

ProfileRecord SynapseCore::close_window()
{
    advance(deadline_us_);
    for (std::size_t i = head_; i < queue_.size(); ++i)
    {
        ++record_.flushed;
        record_.events_flushed += matrix_.row(queue_[i].key).size();
    }
    queue_.clear();
    head_ = 0;

    ring_.take(step_ + 1, written_);
    written_step_ = step_ + 1;
    record_.busy_us += costs_->sdram_write_us(writers_);
    window_open_ = false;

    ProfileRecord out = record_;
    record_ = ProfileRecord{};
    record_.core = address_;
    record_.role = role_;
    record_.step = step_ + 1;
    return out;
}

std::span<const double> SynapseCore::written_input(std::uint32_t step) const
{
    if (step != written_step_)
    {
        throw SchedulingError(fmt::format(
                "synapse core ({},{},{}) has input for step {}, not {}",
                address_.chip.x, address_.chip.y, address_.core,
                written_step_, step));
    }
    return written_;
}

ProfileRecord synapse_core_run_window(SynapseCore &core,
        std::span<const Packet> arrivals, std::uint32_t step, double open_us)
{
    core.open_window(step, open_us);
    for (const Packet &p : arrivals)
    {
        core.advance(p.arrival_us);
        core.receive(p);
        core.advance(p.arrival_us);
    }
    return core.close_window();
}

// ---------------------------------------------------------------------------

NeuronCore::NeuronCore(const LifPropagator &propagator,
        std::uint32_t first_neuron, std::vector<NeuronState> initial,
        const CostModel &costs)
        : propagator_(&propagator)
        , first_neuron_(first_neuron)
        , states_(std::move(initial))
        , costs_(&costs)
{
}

NeuronCoreResult NeuronCore::step(double event_us,
        std::span<const double> input_pa)
{
    NeuronCoreResult out;
    const double read = costs_->neuron_input_read_us;
    const double update = costs_->neuron_update_us;
    for (std::uint32_t i = 0; i < states_.size(); ++i)
    {
        const double in = i < input_pa.size() ? input_pa[i] : 0.0;
        const StepResult r = propagator_->step(states_[i], in, first_neuron_ + i);
        states_[i] = r.state;
        if (r.spiked)
        {
            out.spikes.push_back({i, event_us + read + (i + 1) * update});
        }
    }
    out.busy_us = read + static_cast<double>(states_.size()) * update;
    if (!out.spikes.empty())
    {
        out.busy_us += costs_->sdram_write_mean_us; // DMA E, recording
    }
    if (out.busy_us > costs_->timer_period_us)
    {
        throw SchedulingError(fmt::format(
                "neuron core for neurons {}..{} needs {:.2f} us of a {:.2f} us "
                "period",
                first_neuron_, first_neuron_ + states_.size() - 1, out.busy_us,
                costs_->timer_period_us));
    }
    return out;
}

NeuronCoreResult neuron_core_step(NeuronCore &core, double event_us,
        std::span<const double> input_pa)
{
    return core.step(event_us, input_pa);
}

RandomStream poisson_stream(std::uint64_t seed, std::uint32_t neuron)
{
    return RandomStream(seed, neuron);
}

PoissonCore::PoissonCore(std::uint32_t first_neuron, std::uint32_t neurons,
        double rate_hz, double dt_ms, WeightScale scale, std::uint16_t weight,
        std::uint64_t seed, const CostModel &costs)
        : rate_hz_(rate_hz)
        , dt_ms_(dt_ms)
        , scale_(scale)
        , weight_(weight)
        , costs_(&costs)
{
    for (std::uint32_t i = 0; i < neurons; ++i)
    {
        streams_.push_back(poisson_stream(seed, first_neuron + i));
    }
    buffers_[0].assign(neurons, 0);
    buffers_[1].assign(neurons, 0);
}

PoissonCoreResult PoissonCore::step(std::uint32_t step)
{
    PoissonCoreResult out;
    const std::uint32_t next = step + 1;
    auto &buf = buffers_[next & 1u];
    buffer_step_[next & 1u] = next;
    for (std::size_t i = 0; i < streams_.size(); ++i)
    {
        const std::uint32_t count = poisson_sample(rate_hz_, dt_ms_, streams_[i]);
        std::uint64_t total = std::uint64_t{count} * weight_;
        if (total > kWeightMax)
        {
            total = kWeightMax;
            ++out.saturations;
        }
        buf[i] = static_cast<std::uint16_t>(total);
    }
    out.busy_us = costs_->poisson_update_us *
            static_cast<double>(streams_.size()) / kMaxNeuronsPerCore;
    if (out.busy_us > costs_->timer_period_us)
    {
        throw SchedulingError(fmt::format(
                "Poisson core needs {:.2f} us of a {:.2f} us period",
                out.busy_us, costs_->timer_period_us));
    }
    return out;
}

std::span<const std::uint16_t> PoissonCore::buffer_for(std::uint32_t step) const
{
    if (buffer_step_[step & 1u] != step)
    {
        throw SchedulingError(fmt::format(
                "Poisson buffer for step {} was not written", step));
    }
    return buffers_[step & 1u];
}

PoissonCoreResult poisson_core_step(PoissonCore &core, std::uint32_t step)
{
    return core.step(step);
}

} // namespace ensim
