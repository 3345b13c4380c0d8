#include "ensim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace ensim {

std::vector<TimestepCount> per_timestep_counts(const SpikeTrace &trace,
        std::span<const Polarity> polarity)
{
    if (polarity.size() != trace.populations.size())
    {
        throw SpecError(fmt::format("{} polarities for {} populations",
                polarity.size(), trace.populations.size()));
    }
    std::vector<TimestepCount> out(trace.steps());
    for (std::uint32_t s = 0; s < out.size(); ++s)
    {
        out[s].step = s;
    }
    for (const auto &e : trace.events)
    {
        if (e.step >= out.size())
        {
            throw SpecError(fmt::format("spike at step {} beyond the {} "
                                        "recorded steps",
                    e.step, out.size()));
        }
        auto &c = out[e.step];
        ++c.total;
        if (polarity[e.population] == Polarity::excitatory)
            ++c.excitatory;
        else
            ++c.inhibitory;
    }
    return out;
}

double quantile(std::vector<double> values, double q)
{
    if (values.empty())
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

Histogram freedman_diaconis(std::span<const double> values)
{
    Histogram h;
    if (values.empty())
    {
        return h;
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    h.low = *mn;
    std::vector<double> v(values.begin(), values.end());
    const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
    const double width = 2.0 * iqr * std::cbrt(1.0 / static_cast<double>(v.size()));
    const double span = *mx - *mn;
    std::size_t bins = 1;
    if (width > 0.0 && span > 0.0)
    {
        bins = std::min<std::size_t>(10000,
                static_cast<std::size_t>(std::ceil(span / width)));
        bins = std::max<std::size_t>(bins, 1);
    }
    h.bin_width = span > 0.0 ? span / static_cast<double>(bins) : 1.0;
    h.counts.assign(bins, 0);
    for (const double x : values)
    {
        auto b = static_cast<std::size_t>((x - h.low) / h.bin_width);
        h.counts[std::min(b, bins - 1)]++;
    }
    return h;
}

double cv_isi(std::span<const std::uint32_t> spike_steps)
{
    if (spike_steps.size() < 3)
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    // Integer sums keep the result independent of summation order.
    __int128 n = 0, s1 = 0, s2 = 0;
    for (std::size_t i = 1; i < spike_steps.size(); ++i)
    {
        const __int128 isi = spike_steps[i] - spike_steps[i - 1];
        ++n;
        s1 += isi;
        s2 += isi * isi;
    }
    if (s1 == 0)
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const __int128 num = n * s2 - s1 * s1;
    return std::sqrt(static_cast<double>(num)) / static_cast<double>(s1);
}

double pearson(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b)
{
    if (a.size() != b.size() || a.empty())
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    __int128 sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        sa += a[i];
        sb += b[i];
        saa += __int128{a[i]} * a[i];
        sbb += __int128{b[i]} * b[i];
        sab += __int128{a[i]} * b[i];
    }
    const auto n = static_cast<__int128>(a.size());
    const __int128 va = n * saa - sa * sa;
    const __int128 vb = n * sbb - sb * sb;
    if (va == 0 || vb == 0)
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const __int128 cov = n * sab - sa * sb;
    return static_cast<double>(cov) /
            std::sqrt(static_cast<double>(va) * static_cast<double>(vb));
}

namespace {

double mean_of(const std::vector<double> &v)
{
    if (v.empty())
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

FiringStats firing_stats(const SpikeTrace &trace,
        const FiringStatsOptions &options)
{
    FiringStats out;
    out.options = options;
    const std::uint32_t steps = trace.steps();
    const auto first = static_cast<std::uint32_t>(
            std::min<long long>(steps, std::llround(options.discard_ms / trace.dt_ms)));
    out.active_ms = (steps - first) * trace.dt_ms;
    if (!(out.active_ms > 0.0))
    {
        throw SpecError("discard window leaves no data to analyse");
    }
    const auto bin_steps = static_cast<std::uint32_t>(std::max<long long>(1,
            std::llround(options.correlation_bin_ms / trace.dt_ms)));
    const std::uint32_t bins = (steps - first) / bin_steps;

    // spike steps per neuron, per population
    std::vector<std::vector<std::vector<std::uint32_t>>> trains(trace.populations.size());
    for (std::size_t p = 0; p < trains.size(); ++p)
    {
        trains[p].resize(trace.population_sizes[p]);
    }
    for (const auto &e : trace.events)
    {
        if (e.step >= first)
        {
            trains[e.population][e.index].push_back(e.step);
        }
    }

    for (std::size_t p = 0; p < trains.size(); ++p)
    {
        PopulationStats ps;
        ps.name = trace.populations[p];
        auto &tr = trains[p];
        for (auto &t : tr)
        {
            std::sort(t.begin(), t.end());
            ps.rates_hz.push_back(static_cast<double>(t.size()) / (out.active_ms * 1e-3));
            const double cv = cv_isi(t);
            if (std::isnan(cv))
                ++ps.cv_excluded;
            else
                ps.cv_isi.push_back(cv);
        }

        // Seeded partial shuffle picks the correlation subsample.
        std::vector<std::uint32_t> ids(tr.size());
        std::iota(ids.begin(), ids.end(), 0u);
        const std::size_t k = std::min<std::size_t>(options.correlation_sample, ids.size());
        RandomStream rng(options.seed, p);
        for (std::size_t i = 0; i < k; ++i)
        {
            const std::size_t j = i + static_cast<std::size_t>(
                    rng.uniform() * static_cast<double>(ids.size() - i));
            std::swap(ids[i], ids[std::min(j, ids.size() - 1)]);
        }
        ps.sample.assign(ids.begin(), ids.begin() + static_cast<long>(k));
        std::sort(ps.sample.begin(), ps.sample.end());

        if (bins >= 2)
        {
            std::vector<std::vector<std::uint32_t>> binned;
            for (const std::uint32_t id : ps.sample)
            {
                std::vector<std::uint32_t> counts(bins, 0);
                for (const std::uint32_t s : tr[id])
                {
                    const std::uint32_t b = (s - first) / bin_steps;
                    if (b < bins)
                        ++counts[b];
                }
                binned.push_back(std::move(counts));
            }
            for (std::size_t i = 0; i < binned.size(); ++i)
            {
                for (std::size_t j = i + 1; j < binned.size(); ++j)
                {
                    const double r = pearson(binned[i], binned[j]);
                    if (std::isnan(r))
                        ++ps.correlation_excluded;
                    else
                        ps.correlations.push_back(r);
                }
            }
        }

        ps.mean_rate_hz = mean_of(ps.rates_hz);
        ps.mean_cv = mean_of(ps.cv_isi);
        ps.mean_correlation = mean_of(ps.correlations);
        ps.rate_histogram = freedman_diaconis(ps.rates_hz);
        ps.cv_histogram = freedman_diaconis(ps.cv_isi);
        ps.correlation_histogram = freedman_diaconis(ps.correlations);
        out.populations.push_back(std::move(ps));
    }
    return out;
}

namespace {

nlohmann::json number(double x)
{
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

nlohmann::json histogram_json(const Histogram &h)
{
    return {{"low", h.low}, {"bin_width", h.bin_width}, {"counts", h.counts}};
}

} // namespace

std::string firing_stats_json(const FiringStats &stats)
{
    nlohmann::json doc;
    doc["metadata"] = {
            {"discard_ms", stats.options.discard_ms},
            {"active_ms", stats.active_ms},
            {"correlation_estimator", "pearson on binned spike counts"},
            {"correlation_bin_ms", stats.options.correlation_bin_ms},
            {"correlation_sample_per_population", stats.options.correlation_sample},
            {"correlation_sample_seed", stats.options.seed},
            {"cv_isi", "population standard deviation over mean of ISIs"},
            {"histogram_binning", "Freedman-Diaconis"},
    };
    nlohmann::json pops = nlohmann::json::array();
    for (const auto &p : stats.populations)
    {
        pops.push_back({
                {"name", p.name},
                {"neurons", p.rates_hz.size()},
                {"mean_rate_hz", number(p.mean_rate_hz)},
                {"mean_cv_isi", number(p.mean_cv)},
                {"cv_excluded", p.cv_excluded},
                {"mean_correlation", number(p.mean_correlation)},
                {"correlation_pairs", p.correlations.size()},
                {"correlation_excluded", p.correlation_excluded},
                {"rate_histogram", histogram_json(p.rate_histogram)},
                {"cv_histogram", histogram_json(p.cv_histogram)},
                {"correlation_histogram", histogram_json(p.correlation_histogram)},
        });
    }
    doc["populations"] = pops;
    return doc.dump(2) + "\n";
}

FlushReport flush_report(std::span<const ProfileRecord> profiles)
{
    FlushReport r;
    for (const auto &p : profiles)
    {
        r.received += p.received;
        r.processed += p.processed;
        r.flushed += p.flushed;
        r.events_processed += p.events_processed;
        r.events_flushed += p.events_flushed;
        r.cross_timestep += p.cross_timestep;
        r.max_flushed_in_step = std::max(r.max_flushed_in_step, p.flushed);
    }
    const std::uint64_t total = r.events_processed + r.events_flushed;
    r.loss_fraction = total == 0 ? 0.0
                                 : static_cast<double>(r.events_flushed) /
                    static_cast<double>(total);
    return r;
}

double energy_per_event_uj(const EnergyFigures &f)
{
    if (!(f.synaptic_events > 0.0))
    {
        throw SpecError(fmt::format("'{}' has no synaptic events", f.label));
    }
    if (!(f.total_energy_kwh >= 0.0))
    {
        throw SpecError(fmt::format("'{}' has negative energy", f.label));
    }
    constexpr double kMicrojoulePerKwh = 3.6e12;
    return f.total_energy_kwh * kMicrojoulePerKwh / f.synaptic_events;
}

double scale_energy_kwh(double kwh, double from_s, double to_s)
{
    if (!(from_s > 0.0) || !(to_s >= 0.0))
    {
        throw SpecError("energy scaling needs a positive source duration");
    }
    return kwh * to_s / from_s;
}

std::vector<EnergyFigures> parse_energy_table(std::string_view text)
{
    std::vector<EnergyFigures> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        line = line.substr(0, line.find('#'));
        std::istringstream f(line);
        EnergyFigures e;
        std::string events;
        if (!(f >> e.label))
        {
            continue;
        }
        if (!(f >> e.wall_clock_s >> e.total_energy_kwh >> events))
        {
            throw SpecError(fmt::format("energy table line {}: expected 'label "
                                        "wall_clock_s total_kwh events'",
                    line_no));
        }
        if (events != "-")
        {
            try
            {
                e.synaptic_events = std::stod(events);
            }
            catch (const std::exception &)
            {
                throw SpecError(fmt::format("energy table line {}: bad event "
                                            "count '{}'",
                        line_no, events));
            }
        }
        if (e.wall_clock_s <= 0.0 || e.total_energy_kwh < 0.0 || e.synaptic_events < 0.0)
        {
            throw SpecError(fmt::format("energy table line {}: values must be "
                                        "non-negative",
                    line_no));
        }
        out.push_back(e);
    }
    return out;
}

std::vector<EnergyFigures> load_energy_table(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw IoError(fmt::format("cannot read energy table '{}'", path));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_energy_table(buf.str());
}

} // namespace ensim
