#pragma once

// Independent reference computations used by unit and acceptance tests.
// None of these call into the library code they check.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ensim/kinetics.hpp"

namespace ensim::testing {

struct SubthresholdState
{
    double v_mv{0.0};
    double i_pa{0.0};
};

// Forward Euler on dV/dt = (E - V)/tau_m + R (I_syn + I_dc)/tau_m,
// dI/dt = -I/tau_syn over one step of `dt_ms`, no threshold.
inline SubthresholdState euler_step(const NeuronParams &p, SubthresholdState s,
        double dt_ms, int substeps)
{
    const double h = dt_ms / substeps;
    const double r = p.r_mohm * 1e-3; // mV per pA
    for (int k = 0; k < substeps; ++k)
    {
        const double dv = (p.e_rest_mv - s.v_mv + r * (s.i_pa + p.i_dc_pa)) / p.tau_m_ms;
        const double di = -s.i_pa / p.tau_syn_ms;
        s.v_mv += h * dv;
        s.i_pa += h * di;
    }
    return s;
}

// Richardson extrapolation of two Euler resolutions (dt/n and dt/2n)
// cancels the first-order error term.
inline SubthresholdState fine_step(const NeuronParams &p, SubthresholdState s,
        double input_pa, double dt_ms, int substeps = 1000)
{
    s.i_pa += input_pa;
    const auto a = euler_step(p, s, dt_ms, substeps);
    const auto b = euler_step(p, s, dt_ms, 2 * substeps);
    return {2.0 * b.v_mv - a.v_mv, 2.0 * b.i_pa - a.i_pa};
}

// Analytic membrane potential at time t after a state (v0, i0) with no
// further input and no threshold.
inline double analytic_v(const NeuronParams &p, double v0, double i0, double t_ms)
{
    const double r = p.r_mohm * 1e-3;
    const double tm = p.tau_m_ms;
    const double ts = p.tau_syn_ms;
    const double em = std::exp(-t_ms / tm);
    double syn = 0.0;
    if (std::abs(tm - ts) < 1e-9)
        syn = r * i0 * (t_ms / tm) * em;
    else
        syn = r * i0 * ts / (ts - tm) * (std::exp(-t_ms / ts) - em);
    return p.e_rest_mv + (v0 - p.e_rest_mv) * em + r * p.i_dc_pa * (1.0 - em) + syn;
}

// Steady firing period of a DC-driven neuron, ms.
inline double lif_period_ms(const NeuronParams &p)
{
    const double drive = p.r_mohm * 1e-3 * p.i_dc_pa;
    const double from = p.v_reset_mv - p.e_rest_mv;
    const double to = p.v_thresh_mv - p.e_rest_mv;
    return p.t_ref_ms + p.tau_m_ms * std::log((drive - from) / (drive - to));
}

// Delayed-delivery accumulator with the obvious semantics.
class MapRing
{
public:
    void add(std::uint32_t step, std::uint32_t delay, std::uint32_t target, double v)
    {
        pending_[{step + delay, target}] += v;
    }
    double take(std::uint32_t step, std::uint32_t target)
    {
        const auto it = pending_.find({step, target});
        if (it == pending_.end())
            return 0.0;
        const double v = it->second;
        pending_.erase(it);
        return v;
    }
    [[nodiscard]] bool empty() const { return pending_.empty(); }

private:
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> pending_;
};

// CV of intervals from deviations about the mean, evaluated exactly:
// sum((n x_i - S)^2) / n is the integer n * sum(x^2) - S^2.
inline double brute_cv(const std::vector<std::int64_t> &intervals)
{
    if (intervals.size() < 2)
        return std::nan("");
    const auto n = static_cast<__int128>(intervals.size());
    __int128 s = 0;
    for (const auto x : intervals)
        s += x;
    __int128 dev = 0;
    for (const auto x : intervals)
        dev += (n * x - s) * (n * x - s);
    if (s == 0)
        return std::nan("");
    return std::sqrt(static_cast<double>(dev / n)) / static_cast<double>(s);
}

inline double brute_pearson(const std::vector<std::int64_t> &a,
        const std::vector<std::int64_t> &b)
{
    const auto n = static_cast<__int128>(a.size());
    __int128 sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        sa += a[i];
        sb += b[i];
    }
    __int128 cab = 0, caa = 0, cbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        const __int128 da = n * a[i] - sa;
        const __int128 db = n * b[i] - sb;
        cab += da * db;
        caa += da * da;
        cbb += db * db;
    }
    if (caa == 0 || cbb == 0)
        return std::nan("");
    return static_cast<double>(cab / n) /
            std::sqrt(static_cast<double>(caa / n) * static_cast<double>(cbb / n));
}

} // namespace ensim::testing
