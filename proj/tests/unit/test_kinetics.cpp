#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "ensim/kinetics.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ensim;
using ensim::testing::analytic_v;
using ensim::testing::fine_step;

namespace {

NeuronParams model_params()
{
    return testing::benchmark_spec().neuron_model("lif");
}

NeuronParams no_threshold(NeuronParams p)
{
    p.v_thresh_mv = std::numeric_limits<double>::max();
    return p;
}

} // namespace

TEST_SUITE("kinetics")
{
    TEST_CASE("resting state is a fixed point")
    {
        const NeuronParams p = model_params();
        const auto r = lif_step({p.e_rest_mv, 0.0, 0}, p, 0.0, 0.1);
        CHECK(r.state.v_mv == p.e_rest_mv);
        CHECK(r.state.i_syn_pa == 0.0);
        CHECK_FALSE(r.spiked);
    }

    TEST_CASE("pure membrane decay")
    {
        const NeuronParams p = model_params();
        const auto r = lif_step({p.e_rest_mv + 10.0, 0.0, 0}, p, 0.0, 0.1);
        CHECK(r.state.v_mv == doctest::Approx(p.e_rest_mv + 10.0 * std::exp(-0.01)).epsilon(1e-14));
    }

    TEST_CASE("500 pA step matches fine-step integration")
    {
        const NeuronParams p = model_params();
        const auto r = lif_step({p.e_rest_mv, 0.0, 0}, p, 500.0, 0.1);
        const auto ref = fine_step(p, {p.e_rest_mv, 0.0}, 500.0, 0.1);
        CHECK(std::abs(r.state.v_mv - ref.v_mv) < 1e-6);
        CHECK(std::abs(r.state.i_syn_pa - ref.i_pa) < 1e-6);
    }

    TEST_CASE("subthreshold superposition")
    {
        const NeuronParams p = no_threshold(model_params());
        NeuronParams q = p;
        q.e_rest_mv = 0.0;
        q.v_reset_mv = -1.0;
        const LifPropagator prop(q, 0.1);
        RandomStream rng(11);
        NeuronState a{}, b{}, ab{};
        for (int t = 0; t < 500; ++t)
        {
            const double ia = 400.0 * (rng.uniform() - 0.5);
            const double ib = 400.0 * (rng.uniform() - 0.5);
            a = prop.step(a, ia).state;
            b = prop.step(b, ib).state;
            ab = prop.step(ab, ia + ib).state;
            const double sum = a.v_mv + b.v_mv;
            CHECK(std::abs(ab.v_mv - sum) <= 1e-9 * std::max(1.0, std::abs(sum)));
        }
    }

    TEST_CASE("multi-step trajectory equals the analytic solution")
    {
        for (const double tau_syn : {0.5, 2.0, 10.0})
        {
            NeuronParams p = no_threshold(model_params());
            p.tau_syn_ms = tau_syn;
            p.i_dc_pa = 120.0;
            const LifPropagator prop(p, 0.1);
            NeuronState s{-60.0, 0.0, 0};
            s = prop.step(s, 800.0).state;
            for (int k = 2; k <= 2000; ++k)
            {
                s = prop.step(s, 0.0).state;
                const double want = analytic_v(p, -60.0, 800.0, k * 0.1);
                CHECK(std::abs(s.v_mv - want) <= 1e-9 * std::abs(want));
            }
        }
    }

    TEST_CASE("equal time constants use the analytic limit")
    {
        NeuronParams p = no_threshold(model_params());
        p.tau_syn_ms = p.tau_m_ms;
        const LifPropagator prop(p, 0.1);
        NeuronState s{p.e_rest_mv, 0.0, 0};
        s = prop.step(s, 300.0).state;
        for (int k = 2; k <= 100; ++k)
        {
            s = prop.step(s, 0.0).state;
        }
        const double want = analytic_v(p, p.e_rest_mv, 300.0, 10.0);
        CHECK(std::abs(s.v_mv - want) <= 1e-9 * std::abs(want));
        const auto ref = fine_step(p, {p.e_rest_mv, 0.0}, 300.0, 0.1);
        CHECK(std::abs(prop.step({p.e_rest_mv, 0.0, 0}, 300.0).state.v_mv - ref.v_mv) < 1e-6);
    }

    TEST_CASE("spike resets and clamps for the refractory period")
    {
        const NeuronParams p = model_params();
        const LifPropagator prop(p, 0.1);
        const auto fired = prop.step({p.v_thresh_mv - 0.01, 2000.0, 0}, 0.0);
        REQUIRE(fired.spiked);
        CHECK(fired.state.v_mv == p.v_reset_mv);
        CHECK(fired.state.ref_remaining == 20);

        NeuronState s = fired.state;
        double current = s.i_syn_pa;
        for (int k = 0; k < 20; ++k)
        {
            const auto r = prop.step(s, 20000.0);
            CHECK_FALSE(r.spiked);
            CHECK(r.state.v_mv == p.v_reset_mv);
            current = (current + 20000.0) * std::exp(-0.1 / p.tau_syn_ms);
            CHECK(r.state.i_syn_pa == doctest::Approx(current).epsilon(1e-12));
            s = r.state;
        }
        CHECK(s.ref_remaining == 0);
        CHECK(prop.step(s, 20000.0).spiked);
    }

    TEST_CASE("invalid inputs are rejected")
    {
        const NeuronParams p = model_params();
        const LifPropagator prop(p, 0.1);
        CHECK_THROWS_AS((void)prop.step({p.e_rest_mv, 0.0, 0}, std::nan(""), 42), KineticsError);
        try
        {
            (void)prop.step({std::numeric_limits<double>::infinity(), 0.0, 0}, 0.0, 42);
        }
        catch (const KineticsError &e)
        {
            CHECK(std::string(e.what()).find("neuron 42") != std::string::npos);
        }
        NeuronParams bad = p;
        bad.t_ref_ms = 0.25;
        CHECK_THROWS_AS(LifPropagator(bad, 0.1), KineticsError);
        bad = p;
        bad.v_thresh_mv = bad.v_reset_mv;
        CHECK_THROWS_AS(LifPropagator(bad, 0.1), KineticsError);
        bad = p;
        bad.tau_m_ms = 0.0;
        CHECK_THROWS_AS(LifPropagator(bad, 0.1), KineticsError);
    }

    TEST_CASE("poisson sampling")
    {
        RandomStream rng(5);
        for (int i = 0; i < 1000; ++i)
            CHECK(poisson_sample(0.0, 0.1, rng) == 0);
        CHECK_THROWS_AS((void)poisson_sample(-1.0, 0.1, rng), KineticsError);

        SUBCASE("mean at the highest benchmark rate")
        {
            RandomStream s(17);
            double sum = 0.0;
            for (int i = 0; i < 1000000; ++i)
                sum += poisson_sample(23200.0, 0.1, s);
            const double mean = sum / 1e6;
            CHECK(mean >= 2.315);
            CHECK(mean <= 2.325);
        }
        SUBCASE("distribution at mean 1")
        {
            RandomStream s(23);
            std::vector<double> observed(9, 0.0); // 0..7 and 8+
            const int n = 1000000;
            for (int i = 0; i < n; ++i)
            {
                const auto k = poisson_sample(10000.0, 0.1, s);
                observed[std::min<std::uint32_t>(k, 8)] += 1.0;
            }
            double chi2 = 0.0;
            double cdf = 0.0;
            double pk = std::exp(-1.0);
            for (int k = 0; k < 9; ++k)
            {
                const double p = k < 8 ? pk : 1.0 - cdf;
                const double expected = p * n;
                chi2 += (observed[k] - expected) * (observed[k] - expected) / expected;
                cdf += pk;
                pk /= (k + 1);
            }
            CHECK(chi2 < 20.09); // chi-square, 8 dof, p = 0.01
        }
        SUBCASE("streams replay exactly")
        {
            RandomStream a(99, 3), b(99, 3), c(99, 4);
            bool all_same_c = true;
            for (int i = 0; i < 1000; ++i)
            {
                const auto x = poisson_sample(15000.0, 0.1, a);
                CHECK(x == poisson_sample(15000.0, 0.1, b));
                all_same_c = all_same_c && x == poisson_sample(15000.0, 0.1, c);
            }
            CHECK_FALSE(all_same_c);
        }
    }

    TEST_CASE("uniform draws lie in [0, 1)")
    {
        RandomStream rng(1);
        for (int i = 0; i < 100000; ++i)
        {
            const double u = rng.uniform();
            CHECK(u >= 0.0);
            CHECK(u < 1.0);
        }
    }
}
