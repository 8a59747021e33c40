#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fluxgfm/controller.hpp"
#include "fluxgfm/plant.hpp"
#include "fluxgfm/tuning.hpp"

namespace fluxgfm {

/// Power reference step: set-points are recomputed from the new p* at time t
/// while the gains stay frozen at their design values. The reference itself
/// is slew-limited over Scenario::p_ramp_time; converters do not feed raw
/// reference steps into a proportional path.
struct PowerStep {
    double t = 0.0;       ///< s
    double p_star = 0.0;  ///< pu
};

/// Linear grid-frequency ramp between two instants.
struct FreqRamp {
    double t_start = 0.0;  ///< s
    double t_end = 0.0;    ///< s
    double f_start_hz = 50.0;
    double f_end_hz = 50.0;
};

using Event = std::variant<PowerStep, FreqRamp>;

enum class ControlMode { continuous, sampled };

/// One simulation experiment: actual circuit, frozen design, timed events.
struct Scenario {
    std::string name = "custom";
    double duration = 0.7;  ///< s
    PlantParams plant;      ///< actual circuit (plant.L_pu can differ from L0)
    TuningSpec design;      ///< gain design, carries L0_pu
    ControlMode mode = ControlMode::continuous;
    double sample_rate_hz = 10e3;  ///< controller rate in sampled mode
    double p_star_initial = 0.0;   ///< pu
    std::vector<Event> events;     ///< times within [0, duration], non-decreasing
    double dt = 1e-5;              ///< integration step, s
    double output_rate_hz = 25e3;  ///< decimated output grid
    double p_ramp_time = 0.004;    ///< reference slew window per power step, s
};

/// Uniformly sampled simulation channels. All electrical quantities in pu,
/// angles in rad, frequencies in rad/s.
struct TimeSeries {
    double dt = 4e-5;  ///< output grid spacing, s
    std::vector<double> t;
    std::vector<double> p, V, V_hat;
    std::vector<double> omega_c, omega_g, delta;
    std::vector<double> i_d, i_q, u_c_d, u_c_q;
    std::vector<double> psi_hat_d, psi_hat_q, e_d, e_q;

    std::size_t size() const { return t.size(); }
};

/// Integrates the coupled plant + controller system. Continuous mode
/// co-integrates both by RK4; sampled mode runs the controller at
/// sample_rate_hz under zero-order hold with RK4 plant substeps.
/// Throws NonFiniteState (with the divergence time) on instability.
TimeSeries simulate(const Scenario& sc);

/// Per-step settling measurement.
struct StepMetric {
    double t_event = 0.0;
    double p_target = 0.0;       ///< commanded p* after the step
    double p_steady = 0.0;       ///< measured steady value of the segment
    double settling_time_2pct = 0.0;
    double overshoot = 0.0;      ///< pu beyond the steady value, step direction
};

struct ScenarioMetrics {
    std::vector<StepMetric> steps;
    double overshoot = 0.0;          ///< pu, max across step events
    double v_excursion_max = 0.0;    ///< max |V - V*| over the trace
    double steady_p_offset = 0.0;    ///< signed worst p_ss - p* at nominal frequency
    std::optional<double> D_p;       ///< droop coefficient, only with a FreqRamp
};

/// Settling, overshoot, voltage excursion, steady offsets and droop from a
/// simulated trace. Steady values average the final 20 ms of each segment.
/// Throws NoSteadyState when the final window still moves by > 1% of rated.
ScenarioMetrics extract_metrics(const TimeSeries& ts, const Scenario& sc);

/// The four standard experiments: power-step staircases at L = 0.5, 1.0 and
/// 0.1 pu (design L0 = 0.5 pu frozen) and the 50 -> 45 Hz ramp at p* = 0.5.
std::vector<Scenario> standard_scenarios();

/// Lookup by name: step_L050, step_L100, step_L010, framp_L050.
/// Throws std::invalid_argument for unknown names.
Scenario standard_scenario(const std::string& name);

}  // namespace fluxgfm
