#pragma once

#include <string>

#include "fluxgfm/plant.hpp"
#include "fluxgfm/scenarios.hpp"
#include "fluxgfm/tuning.hpp"

namespace fluxgfm {

/// Toolkit configuration mirroring the JSON schema in the README. Physical
/// defaults are the rated 20 kVA / 380 V / 30 A / 50 Hz platform with a
/// 0.1 pu filter and 10 kHz controller rate. Unknown keys are rejected so a
/// typo never silently falls back to a default.
struct Config {
    // base quantities
    double s_rated_va = 20e3;
    double u_base_v = std::sqrt(2.0 / 3.0) * 380.0;
    double i_base_a = std::sqrt(2.0) * 30.0;
    double f_base_hz = 50.0;
    double l_base_h = 0.023;

    // plant (actual circuit)
    double l_pu = 0.5;
    double u_g_pu = 1.0;
    double filter_l_pu = 0.1;

    // gain design
    double l0_pu = 0.5;
    double p_star_pu = 1.0;
    double v_star_pu = 1.0;
    double zeta = 0.9;
    double omega_s_pu = 1.5;  ///< sync bandwidth in multiples of omega0
    PolePair sigma_o_pu = PolePair::double_real(-2.5);  ///< multiples of omega0
    PolePair sigma_v_pu = PolePair::double_real(-1.0);

    // simulation options
    std::string mode = "continuous";  ///< "continuous" or "sampled"
    double controller_rate_hz = 10e3;
    double step_s = 1e-5;
    double output_rate_hz = 25e3;
    double p_ramp_time_s = 0.004;
    bool hexfloat = false;

    std::string scenario = "step_L050";

    double omega0() const { return 2.0 * std::numbers::pi * f_base_hz; }
    PlantParams plant_params() const;
    TuningSpec tuning_spec() const;
    /// Standard scenario by name with the config's plant/design/sim applied.
    Scenario make_scenario(const std::string& name) const;
    /// Applies the config's design and integration options to a scenario.
    void apply_sim_options(Scenario& sc) const;
};

/// Parses and validates a config document. Throws std::runtime_error with a
/// descriptive message on malformed JSON, unknown keys or invalid values.
Config parse_config(const std::string& json_text);

Config load_config_file(const std::string& path);

/// Serializes the full configuration; parse_config(to_json(c)) reproduces c.
std::string to_json(const Config& c);

/// Parses a scenario description; plant bases and the gain design come from
/// the surrounding config, the file supplies timing, impedance and events.
Scenario parse_scenario_file(const std::string& json_text, const Config& base);

}  // namespace fluxgfm
