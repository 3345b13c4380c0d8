#include <doctest.h>

#include <cmath>
#include <string>

#include "ensim/network.hpp"
#include "fixtures.hpp"

using namespace ensim;

TEST_SUITE("network")
{
    TEST_CASE("benchmark file parses and round-trips")
    {
        const NetworkSpec spec = testing::benchmark_spec();
        CHECK(spec.total_neurons() == 77169);
        CHECK(spec.populations.size() == 8);
        CHECK(spec.projections.size() == 64);
        const NetworkSpec again = parse_network_spec(serialize_network_spec(spec));
        CHECK(again == spec);
        CHECK(serialize_network_spec(again) == serialize_network_spec(spec));
    }

    TEST_CASE("zero probabilities give no synapses")
    {
        const NetworkModel net = build_network(testing::small_spec(80, 20, 0.0), 3);
        CHECK(net.neuron_count() == 100);
        CHECK(net.synapses.empty());
    }

    TEST_CASE("pairwise sampling count is binomial and seeded")
    {
        NetworkSpec spec = testing::small_spec(100, 100, 0.0);
        spec.projections.resize(1);
        spec.projections[0].source = "E";
        spec.projections[0].target = "I";
        spec.projections[0].probability = 0.1;
        const NetworkModel a = build_network(spec, 12);
        const NetworkModel b = build_network(spec, 12);
        const double n = static_cast<double>(a.synapses.size());
        CHECK(std::abs(n - 1000.0) <= 4 * 30.0);
        CHECK(a.synapses.size() == b.synapses.size());
        CHECK(a.serialize() == b.serialize());
        const NetworkModel c = build_network(spec, 13);
        CHECK(c.serialize() != a.serialize());
    }

    TEST_CASE("delay rounding and clamping")
    {
        CHECK(delay_to_steps(1.47, 0.1) == 15);
        CHECK(delay_to_steps(0.01, 0.1) == 1);
        CHECK(delay_to_steps(-3.0, 0.1) == 1);
        CHECK(delay_to_steps(40.0, 0.1) == 255);
    }

    TEST_CASE("scaling")
    {
        const NetworkSpec spec = testing::benchmark_spec();
        CHECK(scale_network(spec, 1.0).populations == spec.populations);
        const NetworkSpec tenth = scale_network(spec, 0.1);
        CHECK(std::abs(static_cast<double>(tenth.total_neurons()) - 7717.0) <= 4.0);
        CHECK(tenth.simulation.scale_factor == doctest::Approx(0.1));
        CHECK(tenth.projections == spec.projections);

        NetworkSpec small = testing::small_spec(50, 50, 0.1);
        CHECK(scale_network(small, 0.01).populations[0].size == 1);
        CHECK_THROWS_AS(scale_network(spec, 0.0), SpecError);
        CHECK_THROWS_AS(scale_network(spec, 1.5), SpecError);
    }

    TEST_CASE("materialised synapses obey sign and delay bounds")
    {
        const NetworkSpec spec = scale_network(testing::benchmark_spec(), 0.02);
        const NetworkModel net = build_network(spec, 4);
        REQUIRE(net.synapses.size() > 10000);
        for (std::uint32_t n = 0; n < net.neuron_count(); ++n)
        {
            const Polarity pol = net.populations[net.population_of(n)].polarity;
            for (const auto &s : net.outgoing(n))
            {
                if (pol == Polarity::excitatory)
                    REQUIRE(s.weight_pa >= 0.0);
                else
                    REQUIRE(s.weight_pa <= 0.0);
                REQUIRE(s.delay_steps >= 1);
                REQUIRE(s.delay_steps <= kMaxDelaySteps);
                REQUIRE(s.target < net.neuron_count());
            }
        }
        CHECK(build_network(spec, 4).serialize() == net.serialize());
    }

    TEST_CASE("weight distribution of a large projection")
    {
        NetworkSpec spec = testing::small_spec(400, 400, 0.0);
        spec.projections.resize(1);
        spec.projections[0].source = "E";
        spec.projections[0].target = "I";
        spec.projections[0].probability = 1.0;
        const NetworkModel net = build_network(spec, 8);
        REQUIRE(net.synapses.size() == 160000);
        double sum = 0.0, sq = 0.0;
        for (const auto &s : net.synapses)
        {
            sum += s.weight_pa;
            sq += s.weight_pa * s.weight_pa;
        }
        const double n = static_cast<double>(net.synapses.size());
        const double mean = sum / n;
        const double sd = std::sqrt(sq / n - mean * mean);
        CHECK(std::abs(mean - 87.8) <= 3 * 8.78 / std::sqrt(n));
        CHECK(std::abs(sd - 8.78) <= 3 * 8.78 / std::sqrt(2 * n));
    }

    TEST_CASE("inhibitory weights are stored negative")
    {
        NetworkSpec spec = testing::small_spec(10, 50, 0.0);
        spec.projections[2].probability = 1.0; // I -> E
        const NetworkModel net = build_network(spec, 1);
        REQUIRE(net.synapses.size() == 500);
        for (const auto &s : net.synapses)
            CHECK(s.weight_pa < 0.0);
    }

    TEST_CASE("spec errors")
    {
        NetworkSpec spec = testing::small_spec(10, 10, 0.1);
        spec.projections[0].target = "nowhere";
        CHECK_THROWS_AS(build_network(spec, 1), SpecError);

        spec = testing::small_spec(10, 10, 0.1);
        spec.projections[0].delay_mean_ms = 30.0;
        CHECK_THROWS_AS(build_network(spec, 1), SpecError);

        spec = testing::small_spec(10, 10, 0.1);
        spec.projections[0].probability = 1.5;
        CHECK_THROWS_AS(spec.validate(), SpecError);

        spec = testing::small_spec(10, 10, 0.1);
        spec.simulation.connectivity = ConnectivityScheme::fixed_total_number;
        CHECK_THROWS_AS(build_network(spec, 1), SpecError);

        CHECK_THROWS_AS(parse_network_spec("[population]\nE ten excitatory lif 1 1 1\n"), SpecError);
        CHECK_THROWS_AS(load_network_spec("/nonexistent/model"), SpecError);
    }

    TEST_CASE("input variant selects the background")
    {
        const NetworkModel dc = build_network(testing::small_spec(10, 10, 0.0, "dc"), 1);
        CHECK(std::holds_alternative<DcInput>(dc.populations[0].background));
        CHECK(dc.populations[0].params.i_dc_pa == doctest::Approx(702.4));
        const NetworkModel po = build_network(testing::small_spec(10, 10, 0.0), 1);
        CHECK(std::holds_alternative<PoissonInput>(po.populations[0].background));
        CHECK(po.populations[0].params.i_dc_pa == 0.0);
    }
}
