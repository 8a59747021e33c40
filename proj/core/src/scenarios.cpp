#include "fluxgfm/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fluxgfm {

namespace {

// Piecewise-linear grid frequency in rad/s built from the ramp events.
struct FreqProfile {
    double omega_base;
    std::vector<FreqRamp> ramps;

    double operator()(double t) const {
        double omega = omega_base;
        for (const FreqRamp& r : ramps) {
            if (t >= r.t_end) {
                omega = 2.0 * std::numbers::pi * r.f_end_hz;
            } else if (t > r.t_start) {
                const double frac = (t - r.t_start) / (r.t_end - r.t_start);
                omega = 2.0 * std::numbers::pi * (r.f_start_hz + frac * (r.f_end_hz - r.f_start_hz));
            }
        }
        return omega;
    }
};

// Slew-limited power reference: each step moves the reference along a smooth
// ramp from its value at the event time to the target over the ramp window.
struct PowerProfile {
    struct Ramp {
        double t, p_from, p_to, span;
    };
    double p_initial = 0.0;
    std::vector<Ramp> ramps;

    double operator()(double t) const {
        double p = p_initial;
        for (const Ramp& r : ramps) {
            if (t >= r.t + r.span) {
                p = r.p_to;
            } else if (t >= r.t && r.span > 0.0) {
                const double u = (t - r.t) / r.span;
                p = r.p_from + (r.p_to - r.p_from) * u * u * (3.0 - 2.0 * u);
            }
        }
        return p;
    }

    double rate(double t) const {
        for (const Ramp& r : ramps) {
            if (t >= r.t && t < r.t + r.span && r.span > 0.0) {
                const double u = (t - r.t) / r.span;
                return (r.p_to - r.p_from) * 6.0 * u * (1.0 - u) / r.span;
            }
        }
        return 0.0;
    }
};

// Composite state: [i_s_d, i_s_q, theta_g, psi_hat_d, psi_hat_q, gamma_d, gamma_q, theta_c]
using SimState = StateVec<8>;

struct SimContext {
    ControllerGains gains;
    PlantParams plant;
    PlantParams nominal;
    FreqProfile freq;
};

// Set-point constellation as a continuous function of time, memoized per
// reference value, plus the integrator compensation that keeps the moving
// flux reference out of the proportional path (the reference acts through
// the integral path only, so it never kicks the frequency estimate).
struct ReferenceTracker {
    const TuningSpec* design;
    const PowerProfile* prof;
    Vec2 k_i, k_p;
    double ki2 = 0.0;
    mutable double last_p = std::numeric_limits<double>::quiet_NaN();
    mutable Setpoints memo;

    const Setpoints& at(double t) const {
        const double p = (*prof)(t);
        if (p != last_p) {
            memo = retarget(*design, p);
            last_p = p;
        }
        return memo;
    }

    Vec2 gamma_compensation(double t, const Setpoints& sp) const {
        const double pdot = prof->rate(t);
        if (pdot == 0.0 || ki2 <= 0.0) return {};
        const double alpha = design->L0_pu / (design->U_g * design->V_star);
        const double x = alpha * sp.p_star;
        const double root = std::sqrt(std::max(1.0 - x * x, 1e-12));
        const Vec2 dpsig_dt = (-pdot * alpha / (root * design->omega0)) * sp.u_g_star;
        return (-dot(k_p, dpsig_dt) / ki2) * k_i;
    }
};

SimState continuous_field(const SimContext& ctx, const ReferenceTracker& ref, double t,
                          const SimState& x) {
    const Setpoints& sp = ref.at(t);
    const Vec2 i_s{x[0], x[1]};
    const ControllerState cs{{x[3], x[4]}, {x[5], x[6]}, x[7]};
    const ControllerOutputs out = controller_outputs(cs, i_s, ctx.gains, ctx.nominal, sp);
    const Vec2 u_g_s = grid_voltage_s(x[2], ctx.plant);
    const Vec2 di_s = (out.u_c_s - u_g_s) / ctx.plant.L_sec();
    const Vec2 dpsih = -out.omega_c * jmul(cs.psi_hat) + out.u_c + ctx.gains.K_o * out.e;
    const Vec2 dgamma = out.e + ref.gamma_compensation(t, sp);
    SimState d;
    d[0] = di_s.d;
    d[1] = di_s.q;
    d[2] = ctx.freq(t);
    d[3] = dpsih.d;
    d[4] = dpsih.q;
    d[5] = dgamma.d;
    d[6] = dgamma.q;
    d[7] = out.omega_c;
    return d;
}

// Plant-only field under a held stationary-frame voltage command.
SimState held_plant_field(const SimContext& ctx, Vec2 u_c_s_held, double t,
                          const SimState& x) {
    const Vec2 u_g_s = grid_voltage_s(x[2], ctx.plant);
    const Vec2 di_s = (u_c_s_held - u_g_s) / ctx.plant.L_sec();
    SimState d;
    d[0] = di_s.d;
    d[1] = di_s.q;
    d[2] = ctx.freq(t);
    return d;  // controller states frozen between samples
}

PowerProfile split_events(const Scenario& sc, FreqProfile& freq) {
    PowerProfile prof;
    prof.p_initial = sc.p_star_initial;
    double prev_t = 0.0;
    for (const Event& ev : sc.events) {
        const double t = std::holds_alternative<PowerStep>(ev)
                             ? std::get<PowerStep>(ev).t
                             : std::get<FreqRamp>(ev).t_start;
        if (t < prev_t || t < 0.0 || t > sc.duration)
            throw std::invalid_argument("scenario events must be time-ordered within [0, duration]");
        prev_t = t;
        if (std::holds_alternative<PowerStep>(ev)) {
            const PowerStep st = std::get<PowerStep>(ev);
            prof.ramps.push_back({st.t, prof(st.t), st.p_star, std::max(0.0, sc.p_ramp_time)});
        } else {
            const FreqRamp r = std::get<FreqRamp>(ev);
            if (r.t_end < r.t_start)
                throw std::invalid_argument("frequency ramp must end after it starts");
            freq.ramps.push_back(r);
        }
    }
    return prof;
}

}  // namespace

TimeSeries simulate(const Scenario& sc) {
    if (sc.duration <= 0.0) throw std::invalid_argument("scenario duration must be positive");
    const Design design = full_design(sc.design);

    SimContext ctx{design.gains, sc.plant, sc.plant, {sc.plant.omega_base, {}}};
    ctx.nominal.L_pu = sc.design.L0_pu;
    const PowerProfile p_ref = split_events(sc, ctx.freq);
    ReferenceTracker ref;
    ref.design = &sc.design;
    ref.prof = &p_ref;
    ref.k_i = design.gains.k_i;
    ref.k_p = design.gains.k_p;
    ref.ki2 = dot(design.gains.k_i, design.gains.k_i);

    Setpoints sp = retarget(sc.design, sc.p_star_initial);
    const ControllerState cs0 = initial_state(design.gains, sp);

    SimState x{};
    x[2] = 0.0;  // theta_g
    x[3] = cs0.psi_hat.d;
    x[4] = cs0.psi_hat.q;
    x[5] = cs0.gamma.d;
    x[6] = cs0.gamma.q;
    x[7] = cs0.theta_c;
    // the converter starts unloaded: zero current, e = 0, omega_c = omega0

    const double h = sc.dt;
    const long n_steps = std::lround(sc.duration / h);
    const long decim = std::max(1L, std::lround(1.0 / (h * sc.output_rate_hz)));
    const long ctrl_every = std::max(1L, std::lround(1.0 / (h * sc.sample_rate_hz)));

    TimeSeries ts;
    ts.dt = h * static_cast<double>(decim);
    const std::size_t n_out = static_cast<std::size_t>(n_steps / decim) + 1;
    for (std::vector<double>* ch :
         {&ts.t, &ts.p, &ts.V, &ts.V_hat, &ts.omega_c, &ts.omega_g, &ts.delta, &ts.i_d,
          &ts.i_q, &ts.u_c_d, &ts.u_c_q, &ts.psi_hat_d, &ts.psi_hat_q, &ts.e_d, &ts.e_q})
        ch->reserve(n_out);

    double p_applied = sc.p_star_initial;
    ControllerOutputs held{};  // controller view between samples (sampled mode)

    for (long n = 0; n <= n_steps; ++n) {
        const double t = static_cast<double>(n) * h;
        const bool tick = sc.mode == ControlMode::sampled && n % ctrl_every == 0;

        if (tick) {
            // the sampled controller refreshes its reference once per tick,
            // carrying the integrator so omega_c never sees a reference kick
            const double p_now = p_ref(t);
            if (p_now != p_applied) {
                const Setpoints sp_new = retarget(sc.design, p_now);
                ControllerState tmp{{x[3], x[4]}, {x[5], x[6]}, x[7]};
                tmp = rebias_for_setpoint_change(tmp, ctx.gains, sp, sp_new);
                x[5] = tmp.gamma.d;
                x[6] = tmp.gamma.q;
                sp = sp_new;
                p_applied = p_now;
            }
        }

        const ControllerState now{{x[3], x[4]}, {x[5], x[6]}, x[7]};
        const Vec2 i_s{x[0], x[1]};

        ControllerOutputs out;
        if (sc.mode == ControlMode::continuous) {
            out = controller_outputs(now, i_s, ctx.gains, ctx.nominal, ref.at(t));
        } else if (tick) {
            out = controller_outputs(now, i_s, ctx.gains, ctx.nominal, sp);
            held = out;
        } else {
            out = held;  // zero-order hold of the controller view
        }

        if (n % decim == 0) {
            const Vec2 u_g_s = grid_voltage_s(x[2], ctx.plant);
            ts.t.push_back(t);
            ts.p.push_back(active_power(u_g_s, i_s));
            ts.V.push_back(pcc_voltage_mag(out.u_c_s));
            ts.V_hat.push_back(out.V_hat);
            ts.omega_c.push_back(out.omega_c);
            ts.omega_g.push_back(ctx.freq(t));
            ts.delta.push_back(wrap_angle(x[7] - x[2]));
            ts.i_d.push_back(out.i_dq.d);
            ts.i_q.push_back(out.i_dq.q);
            ts.u_c_d.push_back(out.u_c.d);
            ts.u_c_q.push_back(out.u_c.q);
            ts.psi_hat_d.push_back(x[3]);
            ts.psi_hat_q.push_back(x[4]);
            ts.e_d.push_back(out.e.d);
            ts.e_q.push_back(out.e.q);
        }
        if (n == n_steps) break;

        try {
            if (sc.mode == ControlMode::continuous) {
                x = rk4_step(
                    [&](double tt, const SimState& s) { return continuous_field(ctx, ref, tt, s); },
                    x, t, h);
            } else {
                if (tick) {
                    const ControllerState adv =
                        advance_euler(now, out, h * static_cast<double>(ctrl_every), ctx.gains);
                    if (!all_finite(adv))
                        throw NonFiniteState("simulate: controller diverged", t);
                    x[3] = adv.psi_hat.d;
                    x[4] = adv.psi_hat.q;
                    x[5] = adv.gamma.d;
                    x[6] = adv.gamma.q;
                    x[7] = adv.theta_c;
                }
                // plant substep under the held command; controller states frozen
                const SimState plant_adv = rk4_step(
                    [&](double tt, const SimState& s) { return held_plant_field(ctx, held.u_c_s, tt, s); },
                    x, t, h);
                x[0] = plant_adv[0];
                x[1] = plant_adv[1];
                x[2] = plant_adv[2];
            }
        } catch (const NonFiniteState& ex) {
            throw NonFiniteState(ex.what(), t);
        } catch (const std::invalid_argument& ex) {
            // a non-finite angle reaching rot() is the same failure mode
            throw NonFiniteState(ex.what(), t);
        }
    }
    return ts;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

std::size_t index_at(const TimeSeries& ts, double t) {
    const double idx = t / ts.dt;
    const long k = std::lround(idx);
    return static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(ts.size()) - 1));
}

double mean(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t k = lo; k < hi; ++k) s += v[k];
    return s / static_cast<double>(hi - lo);
}

constexpr double kSteadyWindow = 0.020;  // one fundamental period at 50 Hz

}  // namespace

ScenarioMetrics extract_metrics(const TimeSeries& ts, const Scenario& sc) {
    if (ts.size() < 2) throw std::invalid_argument("extract_metrics: empty trace");
    ScenarioMetrics m;

    // final-window steadiness gate
    {
        const std::size_t lo = index_at(ts, sc.duration - kSteadyWindow);
        const auto [mn, mx] = std::minmax_element(ts.p.begin() + static_cast<long>(lo), ts.p.end());
        if (*mx - *mn > 0.01)
            throw NoSteadyState("extract_metrics: active power still moving in the final window");
    }

    // segment boundaries from power steps
    std::vector<PowerStep> steps;
    std::vector<FreqRamp> ramps;
    for (const Event& ev : sc.events) {
        if (std::holds_alternative<PowerStep>(ev)) steps.push_back(std::get<PowerStep>(ev));
        else ramps.push_back(std::get<FreqRamp>(ev));
    }

    struct Segment {
        double t_begin, t_end;
        double p_target;
        bool stepped;  // begins with a power step
        double p_prev_target;
    };
    std::vector<Segment> segments;
    double seg_start = 0.0;
    double target = sc.p_star_initial;
    for (const PowerStep& st : steps) {
        segments.push_back({seg_start, st.t, target, seg_start > 0.0, target});
        seg_start = st.t;
        target = st.p_star;
    }
    segments.push_back({seg_start, sc.duration, target, seg_start > 0.0, target});
    for (std::size_t k = 1; k < segments.size(); ++k)
        segments[k].p_prev_target = segments[k - 1].p_target;

    const double v_star = sc.design.V_star;
    double worst_offset = 0.0;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const Segment& seg = segments[k];
        const std::size_t lo = index_at(ts, seg.t_begin);
        const std::size_t hi = index_at(ts, seg.t_end) + 1;
        if (hi - lo < 2) continue;
        const double win = std::min(kSteadyWindow, 0.5 * (seg.t_end - seg.t_begin));
        const std::size_t wlo = index_at(ts, seg.t_end - win);
        const double p_ss = mean(ts.p, wlo, hi);

        if (seg.stepped) {
            StepMetric sm;
            sm.t_event = seg.t_begin;
            sm.p_target = seg.p_target;
            sm.p_steady = p_ss;
            const double magnitude = std::abs(seg.p_target - seg.p_prev_target);
            const double thresh = 0.02 * std::max(magnitude, 1e-9);
            double settle_at = seg.t_begin;
            for (std::size_t i = lo; i < hi; ++i)
                if (std::abs(ts.p[i] - p_ss) > thresh) settle_at = ts.t[i];
            sm.settling_time_2pct = std::max(0.0, settle_at - seg.t_begin);
            const double dir = (seg.p_target >= seg.p_prev_target) ? 1.0 : -1.0;
            double ov = 0.0;
            for (std::size_t i = lo; i < hi; ++i) ov = std::max(ov, dir * (ts.p[i] - p_ss));
            sm.overshoot = ov;
            m.overshoot = std::max(m.overshoot, ov);
            m.steps.push_back(sm);
        }

        // steady offsets count only where the grid sits at nominal frequency
        const double w_seg = mean(ts.omega_g, wlo, hi);
        if (std::abs(w_seg - sc.plant.omega_base) < 1e-9 * sc.plant.omega_base) {
            const double off = p_ss - seg.p_target;
            if (std::abs(off) > std::abs(worst_offset)) worst_offset = off;
        }
    }
    m.steady_p_offset = worst_offset;

    for (std::size_t i = 0; i < ts.size(); ++i)
        m.v_excursion_max = std::max(m.v_excursion_max, std::abs(ts.V[i] - v_star));

    if (!ramps.empty()) {
        const FreqRamp& first = ramps.front();
        const std::size_t pre_hi = index_at(ts, first.t_start) + 1;
        const std::size_t pre_lo = index_at(ts, std::max(0.0, first.t_start - kSteadyWindow));
        const std::size_t post_lo = index_at(ts, sc.duration - kSteadyWindow);
        const double p_pre = mean(ts.p, pre_lo, pre_hi);
        const double p_post = mean(ts.p, post_lo, ts.size());
        const double w_pre = mean(ts.omega_g, pre_lo, pre_hi);
        const double w_post = mean(ts.omega_g, post_lo, ts.size());
        const double dw_pu = (w_post - w_pre) / sc.plant.omega_base;
        if (std::abs(dw_pu) > 1e-12) m.D_p = std::abs((p_post - p_pre) / dw_pu);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Standard experiments
// ---------------------------------------------------------------------------

std::vector<Scenario> standard_scenarios() {
    std::vector<Scenario> all;
    const TuningSpec design = reference_design();

    auto step_scenario = [&](const std::string& name, double L_pu) {
        Scenario sc;
        sc.name = name;
        sc.duration = 0.7;
        sc.plant.L_pu = L_pu;
        sc.design = design;
        sc.p_star_initial = 0.0;
        sc.events = {PowerStep{0.1, 0.5}, PowerStep{0.3, 1.0}, PowerStep{0.5, 0.0}};
        return sc;
    };
    all.push_back(step_scenario("step_L050", 0.5));
    all.push_back(step_scenario("step_L100", 1.0));
    all.push_back(step_scenario("step_L010", 0.1));

    Scenario framp;
    framp.name = "framp_L050";
    framp.duration = 1.6;
    framp.plant.L_pu = 0.5;
    framp.design = design;
    framp.p_star_initial = 0.5;
    framp.events = {FreqRamp{0.2, 1.2, 50.0, 45.0}};
    all.push_back(framp);
    return all;
}

Scenario standard_scenario(const std::string& name) {
    for (Scenario& sc : standard_scenarios())
        if (sc.name == name) return sc;
    throw std::invalid_argument("unknown scenario: " + name);
}

}  // namespace fluxgfm
