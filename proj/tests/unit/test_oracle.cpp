#include <doctest.h>

#include <cmath>

#include "ensim/oracle.hpp"
#include "ensim/runtime.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ensim;

TEST_SUITE("oracle")
{
    TEST_CASE("no synapses and no background gives no spikes")
    {
        NetworkSpec spec = testing::small_spec(50, 20, 0.0, "dc");
        for (auto &p : spec.populations)
            p.dc.amplitude_pa = 0.0;
        spec.simulation.v_init_sd_mv = 0.0;
        const NetworkModel net = build_network(spec, 1);
        CHECK(oracle_simulate(net, 2000, {}).events.empty());
    }

    TEST_CASE("DC-driven neuron fires at the closed-form rate")
    {
        NetworkSpec spec = testing::small_spec(1, 1, 0.0, "dc");
        spec.populations[0].dc.amplitude_pa = 500.0;
        spec.populations[1].dc.amplitude_pa = 0.0;
        spec.simulation.v_init_sd_mv = 0.0;
        const NetworkModel net = build_network(spec, 1);
        const SpikeTrace t = oracle_simulate(net, 5000, {});
        REQUIRE(t.events.size() > 5);
        NeuronParams p = net.populations[0].params;
        const double period = testing::lif_period_ms(p);
        for (std::size_t i = 2; i < t.events.size(); ++i)
        {
            const double isi = (t.events[i].step - t.events[i - 1].step) * t.dt_ms;
            CHECK(std::abs(isi - period) <= t.dt_ms);
        }
    }

    TEST_CASE("deterministic and seed-sensitive")
    {
        const NetworkModel net = build_network(testing::small_spec(200, 50, 0.1), 2);
        const auto a = oracle_simulate(net, 1000, {4, true});
        const auto b = oracle_simulate(net, 1000, {4, true});
        const auto c = oracle_simulate(net, 1000, {5, true});
        CHECK(serialize_trace(a) == serialize_trace(b));
        CHECK(serialize_trace(a) != serialize_trace(c));
        const auto unq = oracle_simulate(net, 1000, {4, false});
        CHECK_FALSE(unq.events.empty());
    }

    TEST_CASE("pending deliveries are always in the future")
    {
        const NetworkModel net = build_network(testing::small_spec(100, 30, 0.2), 3);
        ReferenceSimulator sim(net, {1, true});
        for (int t = 0; t < 300; ++t)
        {
            sim.step();
            const std::uint32_t now = sim.current_step();
            for (std::uint32_t n = 0; n < net.neuron_count(); ++n)
                REQUIRE(sim.pending(now - 1, n) == 0.0);
        }
    }

    TEST_CASE("quantised oracle input matches the shared encoder")
    {
        NetworkSpec spec = testing::small_spec(1, 1, 0.0, "dc");
        spec.populations[1].dc.amplitude_pa = 0.0;
        spec.populations[0].dc.amplitude_pa = 2000.0;
        spec.projections[1].probability = 1.0; // E -> I
        spec.projections[1].delay_sd_ms = 0.0;
        spec.simulation.v_init_mean_mv = -65.0;
        spec.simulation.v_init_sd_mv = 0.0;
        const NetworkModel net = build_network(spec, 1);
        REQUIRE(net.synapses.size() == 1);
        const QuantisedWeights q = quantise_weights(net);
        const double want = q.contribution(0, 1, net.synapses[0].weight_pa);
        ReferenceSimulator sim(net, {1, true});
        std::uint32_t fired = 0;
        while (sim.trace().events.empty())
        {
            fired = sim.current_step();
            sim.step();
        }
        CHECK(sim.pending(fired + net.synapses[0].delay_steps, 1) == want);
    }
}
