#include "ensim/kinetics.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

namespace ensim {

namespace {

// mV per (MOhm * pA)
constexpr double kMillivoltPerMegaohmPicoamp = 1e-3;

constexpr double kDegenerateTauRelTol = 1e-12;

} // namespace

void NeuronParams::validate(double dt_ms) const
{
    const auto fail = [](const std::string &what) {
        throw KineticsError("invalid neuron parameters: " + what);
    };
    if (!(dt_ms > 0.0) || !std::isfinite(dt_ms))
    {
        fail("dt must be positive");
    }
    if (!(tau_m_ms > 0.0))
    {
        fail("tau_m must be positive");
    }
    if (!(tau_syn_ms > 0.0))
    {
        fail("tau_syn must be positive");
    }
    if (!(v_thresh_mv > v_reset_mv))
    {
        fail("threshold must exceed reset potential");
    }
    if (!(t_ref_ms >= 0.0))
    {
        fail("refractory period must be non-negative");
    }
    const double ratio = t_ref_ms / dt_ms;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
    {
        fail(fmt::format("refractory period {} ms is not a multiple of dt {} ms",
                t_ref_ms, dt_ms));
    }
    for (const double x : {tau_m_ms, tau_syn_ms, e_rest_mv, r_mohm,
                 v_thresh_mv, v_reset_mv, t_ref_ms, i_dc_pa})
    {
        if (!std::isfinite(x))
        {
            fail("non-finite field");
        }
    }
}

LifPropagator::LifPropagator(const NeuronParams &params, double dt_ms)
        : params_(params)
        , dt_ms_(dt_ms)
{
    params.validate(dt_ms);
    const double tau_m = params.tau_m_ms;
    const double tau_s = params.tau_syn_ms;
    const double r = params.r_mohm * kMillivoltPerMegaohmPicoamp;

    decay_m_ = std::exp(-dt_ms / tau_m);
    decay_syn_ = std::exp(-dt_ms / tau_s);
    dc_to_v_ = -r * std::expm1(-dt_ms / tau_m);

    const double tau_diff = tau_s - tau_m;
    if (std::abs(tau_diff) <= kDegenerateTauRelTol * tau_m)
    {
        // Limit tau_syn -> tau_m: alpha-like kernel (dt/tau) * exp(-dt/tau).
        syn_to_v_ = r * (dt_ms / tau_m) * decay_m_;
    }
    else
    {
        // tau_s/(tau_s - tau_m) * (e^{-h/tau_s} - e^{-h/tau_m}), written as
        // e^{-h/tau_m} * expm1(h/tau_m - h/tau_s) to stay accurate when the
        // two time constants are close.
        const double x = dt_ms * tau_diff / (tau_m * tau_s);
        syn_to_v_ = r * tau_s / tau_diff * decay_m_ * std::expm1(x);
    }
    ref_steps_ = static_cast<std::int32_t>(std::lround(params.t_ref_ms / dt_ms));
}

StepResult LifPropagator::step(const NeuronState &state, double input_pa,
        std::uint64_t neuron_id) const
{
    if (!std::isfinite(input_pa) || !std::isfinite(state.v_mv) ||
            !std::isfinite(state.i_syn_pa) || state.ref_remaining < 0)
    {
        throw KineticsError(fmt::format(
                "neuron {}: non-finite or invalid state (V={}, I_syn={}, "
                "ref={}, input={})",
                neuron_id, state.v_mv, state.i_syn_pa, state.ref_remaining,
                input_pa));
    }

    const double i0 = state.i_syn_pa + input_pa;
    StepResult out;
    out.state.i_syn_pa = i0 * decay_syn_;

    if (state.ref_remaining > 0)
    {
        out.state.v_mv = params_.v_reset_mv;
        out.state.ref_remaining = state.ref_remaining - 1;
        return out;
    }

    const double e = params_.e_rest_mv;
    const double v = e + (state.v_mv - e) * decay_m_ +
            dc_to_v_ * params_.i_dc_pa + syn_to_v_ * i0;
    if (v > params_.v_thresh_mv)
    {
        out.spiked = true;
        out.state.v_mv = params_.v_reset_mv;
        out.state.ref_remaining = ref_steps_;
    }
    else
    {
        out.state.v_mv = v;
        out.state.ref_remaining = 0;
    }
    return out;
}

StepResult lif_step(const NeuronState &state, const NeuronParams &params,
        double input_pa, double dt_ms)
{
    return LifPropagator(params, dt_ms).step(state, input_pa);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
{
    // Decorrelate (seed, id) pairs by passing both through the mixer.
    RandomStream mixer(seed ^ 0x9e3779b97f4a7c15ULL);
    const std::uint64_t a = mixer();
    RandomStream mixer2(a ^ stream_id);
    state_ = mixer2();
}

RandomStream::result_type RandomStream::operator()()
{
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double RandomStream::uniform()
{
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint32_t poisson_sample(double rate_hz, double dt_ms, RandomStream &stream)
{
    if (!(rate_hz >= 0.0) || !std::isfinite(rate_hz))
    {
        throw KineticsError(fmt::format("poisson rate must be >= 0, got {}",
                rate_hz));
    }
    if (!(dt_ms > 0.0))
    {
        throw KineticsError("poisson dt must be positive");
    }
    const double mean = rate_hz * dt_ms * 1e-3;
    if (mean == 0.0)
    {
        return 0;
    }
    if (mean < 30.0)
    {
        // Sequential-search inversion: one uniform per sample.
        const double u = stream.uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint32_t k = 0;
        while (u > cdf && p > 0.0)
        {
            ++k;
            p *= mean / k;
            cdf += p;
        }
        return k;
    }
    std::poisson_distribution<std::uint32_t> dist(mean);
    return dist(stream);
}

} // namespace ensim
