#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "ensim/analysis.hpp"
#include "ensim/clock.hpp"
#include "ensim/hardware.hpp"
#include "ensim/kinetics.hpp"
#include "ensim/network.hpp"
#include "ensim/oracle.hpp"
#include "ensim/run.hpp"
#include "ensim/runtime.hpp"
#include "ensim/trace.hpp"

namespace py = pybind11;
using namespace ensim;

namespace {

NetworkSpec spec_from(const std::string &model_text, std::optional<double> scale,
        std::optional<std::string> input)
{
    NetworkSpec spec = parse_network_spec(model_text);
    if (input)
        spec.simulation.input = parse_input_variant(*input);
    if (scale && *scale != 1.0)
        spec = scale_network(spec, *scale);
    spec.validate();
    return spec;
}

std::uint32_t steps_for(const NetworkModel &net, double duration_ms)
{
    const auto steps = std::llround(duration_ms / net.dt_ms);
    if (steps <= 0)
        throw SpecError("duration shorter than one timestep");
    return static_cast<std::uint32_t>(steps);
}

py::dict summary_dict(const RunSummary &s)
{
    py::dict d;
    d["steps"] = s.steps;
    d["spikes"] = s.spikes;
    d["packets_sent"] = s.packets_sent;
    d["received"] = s.received;
    d["processed"] = s.processed;
    d["flushed"] = s.flushed;
    d["events_processed"] = s.events_processed;
    d["events_flushed"] = s.events_flushed;
    d["cross_timestep"] = s.cross_timestep;
    d["max_flushed_in_step"] = s.max_flushed_in_step;
    d["chips"] = s.chips;
    d["cores"] = s.cores;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Event-driven model of a many-core spiking network machine.";

    py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);
    py::register_exception<KineticsError>(m, "KineticsError", PyExc_ArithmeticError);
    py::register_exception<HardwareError>(m, "HardwareError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<SchedulingError>(m, "SchedulingError", PyExc_RuntimeError);

    py::class_<NeuronParams>(m, "NeuronParams")
            .def(py::init<>())
            .def_readwrite("tau_m_ms", &NeuronParams::tau_m_ms)
            .def_readwrite("tau_syn_ms", &NeuronParams::tau_syn_ms)
            .def_readwrite("e_rest_mv", &NeuronParams::e_rest_mv)
            .def_readwrite("r_mohm", &NeuronParams::r_mohm)
            .def_readwrite("v_thresh_mv", &NeuronParams::v_thresh_mv)
            .def_readwrite("v_reset_mv", &NeuronParams::v_reset_mv)
            .def_readwrite("t_ref_ms", &NeuronParams::t_ref_ms)
            .def_readwrite("i_dc_pa", &NeuronParams::i_dc_pa);

    m.def(
            "lif_step",
            [](const NeuronParams &p, double v_mv, double i_syn_pa, int ref_remaining,
                    double input_pa, double dt_ms) {
                const auto r = ensim::lif_step({v_mv, i_syn_pa, ref_remaining}, p, input_pa, dt_ms);
                return py::make_tuple(r.state.v_mv, r.state.i_syn_pa, r.state.ref_remaining, r.spiked);
            },
            py::arg("params"), py::arg("v_mv"), py::arg("i_syn_pa"), py::arg("ref_remaining"),
            py::arg("input_pa"), py::arg("dt_ms") = 0.1,
            "One exact-integration step; returns (v_mv, i_syn_pa, ref_remaining, spiked).");

    py::class_<NetworkModel>(m, "Network")
            .def_property_readonly("neuron_count", &NetworkModel::neuron_count)
            .def_property_readonly("synapse_count",
                    [](const NetworkModel &n) { return n.synapses.size(); })
            .def_readonly("dt_ms", &NetworkModel::dt_ms)
            .def_property_readonly("populations", [](const NetworkModel &n) {
                std::vector<std::pair<std::string, std::uint32_t>> out;
                for (const auto &p : n.populations)
                    out.emplace_back(p.name, p.size);
                return out;
            });

    m.def(
            "build_network",
            [](const std::string &model_text, std::uint64_t seed, std::optional<double> scale,
                    std::optional<std::string> input) {
                return build_network(spec_from(model_text, scale, input), seed);
            },
            py::arg("model_text"), py::arg("seed") = 1, py::arg("scale") = py::none(),
            py::arg("input") = py::none());

    m.def("canonical_model", [](const std::string &text) {
        return serialize_network_spec(parse_network_spec(text));
    });

    m.def(
            "simulate_oracle",
            [](const NetworkModel &net, double duration_ms, std::uint64_t seed_poisson, bool quantise) {
                const auto steps = steps_for(net, duration_ms);
                py::gil_scoped_release release;
                return serialize_trace(oracle_simulate(net, steps, {seed_poisson, quantise}));
            },
            py::arg("network"), py::arg("duration_ms"), py::arg("seed_poisson") = 1,
            py::arg("quantise") = true, "Reference simulation; returns the trace text.");

    m.def(
            "simulate_hardware",
            [](const NetworkModel &net, double duration_ms, double slowdown,
                    std::uint64_t seed_poisson) {
                const auto steps = steps_for(net, duration_ms);
                RuntimeOptions opt;
                opt.slowdown = slowdown;
                opt.seed_poisson = seed_poisson;
                opt.keep_profiles = false;
                HardwareRun hw;
                {
                    py::gil_scoped_release release;
                    hw = run_hardware(net, MachineSpec{}, CostModel{}, opt, steps);
                }
                return py::make_tuple(serialize_trace(hw.trace), summary_dict(hw.summary));
            },
            py::arg("network"), py::arg("duration_ms"), py::arg("slowdown") = 1.0,
            py::arg("seed_poisson") = 1,
            "Machine model on the default rack with aligned timers; returns (trace text, summary).");

    m.def(
            "firing_stats_json",
            [](const std::string &trace_text, double discard_ms, double bin_ms,
                    std::uint32_t sample, std::uint64_t seed) {
                return firing_stats_json(firing_stats(parse_trace(trace_text),
                        {discard_ms, bin_ms, sample, seed}));
            },
            py::arg("trace_text"), py::arg("discard_ms") = 0.0, py::arg("bin_ms") = 2.0,
            py::arg("sample") = 200, py::arg("seed") = 1);

    m.def(
            "energy_per_event_uj",
            [](double kwh, double events) {
                return energy_per_event_uj({"", 0.0, kwh, events});
            },
            py::arg("kwh"), py::arg("synaptic_events"));
    m.def("scale_energy_kwh", &scale_energy_kwh, py::arg("kwh"), py::arg("from_s"),
            py::arg("to_s"));

    m.def(
            "max_sync_skew_us",
            [](double seconds, double spread_ppm, std::uint64_t seed, bool corrections) {
                const MachineSpec machine;
                ClockSyncConfig cfg;
                cfg.corrections = corrections;
                cfg.record_diagnostics = false;
                ClockSync sync(machine, sample_board_drift(machine, spread_ppm, seed),
                        CostModel{}, 1.0, cfg);
                return simulate_sync_rounds(sync, seconds).max_skew_us;
            },
            py::arg("seconds"), py::arg("spread_ppm") = 50.0, py::arg("seed") = 1,
            py::arg("corrections") = true);

    m.def(
            "run_manifest",
            [](const std::string &manifest_json_text, const std::string &out_dir) {
                RunConfig c = config_from_manifest(manifest_json_text);
                c.out_dir = out_dir;
                RunReport r;
                {
                    py::gil_scoped_release release;
                    r = run(c);
                }
                return py::make_tuple(r.exit_code, r.message);
            },
            py::arg("manifest"), py::arg("out_dir"),
            "Runs a manifest document; returns (exit code, message).");
    m.def(
            "manifest",
            [](const std::string &model_text, const std::string &mode, double duration_ms,
                    double slowdown, std::optional<double> scale, std::uint64_t seed) {
                RunConfig c;
                c.model_text = model_text;
                c.mode = parse_run_mode(mode);
                c.duration_ms = duration_ms;
                c.slowdown = slowdown;
                c.scale = scale;
                c.seed_network = seed;
                c.seed_poisson = seed;
                c.seed_drift = seed;
                c.validate();
                return manifest_json(c);
            },
            py::arg("model_text"), py::arg("mode") = "hardware", py::arg("duration_ms") = 1000.0,
            py::arg("slowdown") = 1.0, py::arg("scale") = py::none(), py::arg("seed") = 1);
}
