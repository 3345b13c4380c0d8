#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ensim/clock.hpp"
#include "fixtures.hpp"

using namespace ensim;

namespace {

MachineSpec line_machine(int width, int board_width)
{
    MachineSpec m;
    m.width = width;
    m.height = 1;
    m.wrap_vertical = false;
    m.board_width = board_width;
    m.board_height = 1;
    m.validate();
    return m;
}

ClockSyncConfig quiet(bool corrections = true)
{
    ClockSyncConfig c;
    c.corrections = corrections;
    c.record_diagnostics = false;
    return c;
}

} // namespace

TEST_SUITE("clock")
{
    TEST_CASE("phase alignment")
    {
        CHECK(phase_align(line_machine(1, 1)) == std::vector<double>{0.0});

        const MachineSpec m = line_machine(4, 3);
        const auto transit = start_signal_transit_ns(m);
        CHECK(transit[0] == 0.0);
        CHECK(transit[3] == 2400.0);
        const auto delay = phase_align(m);
        CHECK(delay[0] == 2400.0);
        CHECK(delay[3] == 0.0);

        const MachineSpec big;
        const auto d = phase_align(big);
        CHECK(*std::min_element(d.begin(), d.end()) == 0.0);

        ClockSync sync(big, std::vector<double>(12, 0.0), CostModel{}, 1.0, quiet());
        for (std::size_t i = 0; i < sync.chips(); ++i)
            CHECK(sync.edge_time_us(i) == 0.0);
    }

    TEST_CASE("beacon correction arithmetic")
    {
        CHECK(beacon_correction(20000.0 * 20000, 20000.0, 20000.0, 0.0) == 0.0);
        // +10 ppm: 4000 extra cycles per 2 s, 0.2 per 100 us period.
        const double c = beacon_correction(20000.0 * 20000 * (1 + 10e-6), 20000.0, 20000.0, 0.0);
        CHECK(c == doctest::Approx(0.2).epsilon(1e-9));
        CHECK(c * 20000 == doctest::Approx(4000.0).epsilon(1e-9));
        CHECK(beacon_correction(400000000.0, 20000.0, 20000.0, 100.0) == doctest::Approx(-0.005));
    }

    TEST_CASE("zero drift needs no corrections")
    {
        ClockSyncConfig cfg;
        ClockSync sync(MachineSpec{}, std::vector<double>(12, 0.0), CostModel{}, 1.0, cfg);
        const auto r = simulate_sync(sync, 7.0);
        CHECK(r.max_skew_all_us < 1e-6);
        for (const auto &d : sync.diagnostics())
            CHECK(std::abs(d.correction_cycles) < 1e-6);
    }

    TEST_CASE("drifting slave is corrected at about 0.2 cycles per period")
    {
        const MachineSpec m = line_machine(16, 8);
        ClockSync sync(m, {0.0, 10.0}, CostModel{}, 1.0, ClockSyncConfig{});
        (void)simulate_sync(sync, 9.0);
        const auto &diag = sync.diagnostics();
        const auto last = std::find_if(diag.rbegin(), diag.rend(),
                [](const SyncDiagnostic &d) { return d.chip == ChipCoord{15, 0}; });
        REQUIRE(last != diag.rend());
        CHECK(last->correction_cycles == doctest::Approx(0.2).epsilon(0.01));
        CHECK(std::abs(last->residual_ns) < 100.0);
    }

    TEST_CASE("twelve boards stay within 5 us for a minute and for 12 hours")
    {
        const MachineSpec m;
        for (const std::uint64_t seed : {1u, 2u, 3u})
        {
            const auto drift = sample_board_drift(m, 50.0, seed);
            CHECK(drift.size() == 12);
            ClockSync per_period(m, drift, CostModel{}, 1.0, quiet());
            CHECK(simulate_sync(per_period, 60.0).max_skew_us < 5.0);
            ClockSync per_round(m, drift, CostModel{}, 1.0, quiet());
            CHECK(simulate_sync_rounds(per_round, 12 * 3600.0).max_skew_us < 5.0);
        }
    }

    TEST_CASE("without the protocol skew grows at the drift differential")
    {
        const MachineSpec m;
        std::vector<double> drift(12, 0.0);
        drift[5] = 50.0;
        ClockSync sync(m, drift, CostModel{}, 1.0, quiet(false));
        const auto r = simulate_sync(sync, 1.0);
        CHECK(r.first_over_5us_s > 0.0);
        CHECK(r.first_over_5us_s < 1.0);
        // 50 ppm: 50 us per second.
        CHECK(r.max_skew_all_us == doctest::Approx(50.0).epsilon(0.01));
    }

    TEST_CASE("drift sampling is bounded and seeded")
    {
        const MachineSpec m;
        const auto a = sample_board_drift(m, 20.0, 4);
        CHECK(a == sample_board_drift(m, 20.0, 4));
        CHECK(a != sample_board_drift(m, 20.0, 5));
        for (const double d : a)
            CHECK(std::abs(d) <= 20.0);
        CHECK_THROWS_AS(sample_board_drift(m, 200.0, 1), SpecError);
        CHECK_THROWS_AS(ClockSync(m, {1.0}, CostModel{}, 1.0, quiet()), SpecError);
    }

    TEST_CASE("tabulated schedule replays edge times")
    {
        const MachineSpec m;
        const auto drift = sample_board_drift(m, 30.0, 9);
        ClockSync a(m, drift, CostModel{}, 1.0, quiet());
        ClockSync b(m, drift, CostModel{}, 1.0, quiet());
        const std::vector<ChipCoord> chips{{0, 0}, {10, 7}};
        const auto schedule = tabulated_schedule(a, chips, 50);
        std::size_t i10 = 0;
        for (std::size_t i = 0; i < b.chips(); ++i)
            if (b.chip(i) == ChipCoord{10, 7})
                i10 = i;
        for (std::uint32_t s = 0; s < 50; ++s)
        {
            CHECK(schedule({0, 0}, s) == b.edge_time_us(0));
            CHECK(schedule({10, 7}, s) == b.edge_time_us(i10));
            b.advance_period();
        }
        CHECK_THROWS_AS(schedule({0, 0}, 50), SchedulingError);
        CHECK_THROWS_AS(schedule({1, 1}, 0), SchedulingError);
    }
}
