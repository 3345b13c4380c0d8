#pragma once

#include <string>

#include <fmt/format.h>

#include "ensim/hardware.hpp"
#include "ensim/network.hpp"

#ifndef ENSIM_DATA_DIR
#define ENSIM_DATA_DIR "data"
#endif

namespace ensim::testing {

inline std::string data_path(const std::string &name)
{
    return std::string(ENSIM_DATA_DIR) + "/" + name;
}

inline NetworkSpec benchmark_spec()
{
    return load_network_spec(data_path("microcircuit.model"));
}

// Two populations, one per polarity, fully described in text.
inline std::string small_model_text(std::uint32_t exc, std::uint32_t inh,
        double probability, const std::string &input = "poisson")
{
    return fmt::format(R"([simulation]
dt_ms = 0.1
input = {3}
v_init_mean_mv = -58
v_init_sd_mv = 5

[neuron lif]
tau_m_ms = 10
tau_syn_ms = 0.5
e_rest_mv = -65
r_mohm = 40
v_thresh_mv = -50
v_reset_mv = -65
t_ref_ms = 2
i_dc_pa = 0

[population]
E {0} excitatory lif 16000 87.8 702.4
I {1} inhibitory lif 15000 87.8 658.5

[projection]
E E {2} 87.8 8.78 1.5 0.75
E I {2} 87.8 8.78 1.5 0.75
I E {2} 351.2 35.32 0.75 0.375
I I {2} 351.2 35.32 0.75 0.375
)",
            exc, inh, probability, input);
}

inline NetworkSpec small_spec(std::uint32_t exc, std::uint32_t inh,
        double probability, const std::string &input = "poisson")
{
    return parse_network_spec(small_model_text(exc, inh, probability, input));
}

// 4 x 3 chips on two boards, no wrap.
inline MachineSpec toy_machine()
{
    MachineSpec m;
    m.width = 4;
    m.height = 3;
    m.wrap_vertical = false;
    m.board_width = 2;
    m.board_height = 3;
    m.validate();
    return m;
}

} // namespace ensim::testing
