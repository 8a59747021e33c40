#include "fluxgfm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fluxgfm {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            throw std::runtime_error("config: unknown key \"" + item.key() + "\" in " + where);
}

double num(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number())
        throw std::runtime_error(std::string("config: \"") + key + "\" must be a number");
    return obj[key].get<double>();
}

PolePair pole_pair(const json& obj, const char* key, const PolePair& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj[key];
    if (!v.is_array() || v.size() != 2 || !v[0].is_array() || v[0].size() != 2 ||
        !v[1].is_array() || v[1].size() != 2)
        throw std::runtime_error(std::string("config: \"") + key +
                                 "\" must be [[re, im], [re, im]]");
    PolePair p{{v[0][0].get<double>(), v[0][1].get<double>()},
               {v[1][0].get<double>(), v[1][1].get<double>()}};
    if (!p.conjugate_closed())
        throw std::runtime_error(std::string("config: \"") + key +
                                 "\" is not closed under conjugation");
    return p;
}

json pole_pair_json(const PolePair& p) {
    return json::array({json::array({p.s1.real(), p.s1.imag()}),
                        json::array({p.s2.real(), p.s2.imag()})});
}

void validate(const Config& c) {
    if (c.f_base_hz <= 0.0) throw std::runtime_error("config: f_base_hz must be positive");
    if (c.l_pu <= 0.0) throw std::runtime_error("config: l_pu must be positive");
    if (c.l0_pu <= 0.0) throw std::runtime_error("config: l0_pu must be positive");
    if (c.l_pu < c.filter_l_pu)
        throw std::runtime_error("config: total l_pu cannot be below filter_l_pu");
    if (c.zeta <= 0.0) throw std::runtime_error("config: zeta must be positive");
    if (c.omega_s_pu <= 0.0) throw std::runtime_error("config: omega_s_pu must be positive");
    if (c.u_g_pu <= 0.0 || c.v_star_pu <= 0.0)
        throw std::runtime_error("config: voltages must be positive");
    if (c.mode != "continuous" && c.mode != "sampled")
        throw std::runtime_error("config: mode must be \"continuous\" or \"sampled\"");
    if (c.step_s <= 0.0 || c.output_rate_hz <= 0.0 || c.controller_rate_hz <= 0.0)
        throw std::runtime_error("config: rates and steps must be positive");
}

}  // namespace

PlantParams Config::plant_params() const {
    PlantParams p;
    p.L_pu = l_pu;
    p.omega_base = omega0();
    p.U_g = u_g_pu;
    p.S_base = s_rated_va;
    p.U_base = u_base_v;
    p.I_base = i_base_a;
    return p;
}

TuningSpec Config::tuning_spec() const {
    TuningSpec s;
    const double w0 = omega0();
    s.sigma_o = {sigma_o_pu.s1 * w0, sigma_o_pu.s2 * w0};
    s.sigma_v = {sigma_v_pu.s1 * w0, sigma_v_pu.s2 * w0};
    s.zeta = zeta;
    s.omega_s = omega_s_pu * w0;
    s.L0_pu = l0_pu;
    s.p_star = p_star_pu;
    s.V_star = v_star_pu;
    s.U_g = u_g_pu;
    s.omega0 = w0;
    return s;
}

void Config::apply_sim_options(Scenario& sc) const {
    sc.design = tuning_spec();
    PlantParams p = plant_params();
    p.L_pu = sc.plant.L_pu;  // scenarios own their impedance
    sc.plant = p;
    sc.mode = mode == "sampled" ? ControlMode::sampled : ControlMode::continuous;
    sc.sample_rate_hz = controller_rate_hz;
    sc.dt = step_s;
    sc.output_rate_hz = output_rate_hz;
    sc.p_ramp_time = p_ramp_time_s;
}

Scenario Config::make_scenario(const std::string& name) const {
    Scenario sc = standard_scenario(name);
    apply_sim_options(sc);
    return sc;
}

Config parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: malformed JSON: ") + e.what());
    }
    if (!root.is_object()) throw std::runtime_error("config: top level must be an object");
    reject_unknown(root, {"base", "plant", "design", "sim", "scenario"}, "the top level");

    Config c;
    if (root.contains("base")) {
        const json& b = root["base"];
        reject_unknown(b, {"s_rated_va", "u_base_v", "i_base_a", "f_base_hz", "l_base_h"},
                       "\"base\"");
        c.s_rated_va = num(b, "s_rated_va", c.s_rated_va);
        c.u_base_v = num(b, "u_base_v", c.u_base_v);
        c.i_base_a = num(b, "i_base_a", c.i_base_a);
        c.f_base_hz = num(b, "f_base_hz", c.f_base_hz);
        c.l_base_h = num(b, "l_base_h", c.l_base_h);
    }
    if (root.contains("plant")) {
        const json& p = root["plant"];
        reject_unknown(p, {"l_pu", "u_g_pu", "filter_l_pu"}, "\"plant\"");
        c.l_pu = num(p, "l_pu", c.l_pu);
        c.u_g_pu = num(p, "u_g_pu", c.u_g_pu);
        c.filter_l_pu = num(p, "filter_l_pu", c.filter_l_pu);
    }
    if (root.contains("design")) {
        const json& d = root["design"];
        reject_unknown(d,
                       {"l0_pu", "p_star_pu", "v_star_pu", "zeta", "omega_s_pu", "sigma_o_pu",
                        "sigma_v_pu"},
                       "\"design\"");
        c.l0_pu = num(d, "l0_pu", c.l0_pu);
        c.p_star_pu = num(d, "p_star_pu", c.p_star_pu);
        c.v_star_pu = num(d, "v_star_pu", c.v_star_pu);
        c.zeta = num(d, "zeta", c.zeta);
        c.omega_s_pu = num(d, "omega_s_pu", c.omega_s_pu);
        c.sigma_o_pu = pole_pair(d, "sigma_o_pu", c.sigma_o_pu);
        c.sigma_v_pu = pole_pair(d, "sigma_v_pu", c.sigma_v_pu);
    }
    if (root.contains("sim")) {
        const json& s = root["sim"];
        reject_unknown(s,
                       {"mode", "controller_rate_hz", "step_s", "output_rate_hz",
                        "p_ramp_time_s", "hexfloat"},
                       "\"sim\"");
        if (s.contains("mode")) c.mode = s["mode"].get<std::string>();
        c.controller_rate_hz = num(s, "controller_rate_hz", c.controller_rate_hz);
        c.step_s = num(s, "step_s", c.step_s);
        c.output_rate_hz = num(s, "output_rate_hz", c.output_rate_hz);
        c.p_ramp_time_s = num(s, "p_ramp_time_s", c.p_ramp_time_s);
        if (s.contains("hexfloat")) c.hexfloat = s["hexfloat"].get<bool>();
    }
    if (root.contains("scenario")) c.scenario = root["scenario"].get<std::string>();
    validate(c);
    return c;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_json(const Config& c) {
    json root;
    root["base"] = {{"s_rated_va", c.s_rated_va},
                    {"u_base_v", c.u_base_v},
                    {"i_base_a", c.i_base_a},
                    {"f_base_hz", c.f_base_hz},
                    {"l_base_h", c.l_base_h}};
    root["plant"] = {{"l_pu", c.l_pu}, {"u_g_pu", c.u_g_pu}, {"filter_l_pu", c.filter_l_pu}};
    root["design"] = {{"l0_pu", c.l0_pu},
                      {"p_star_pu", c.p_star_pu},
                      {"v_star_pu", c.v_star_pu},
                      {"zeta", c.zeta},
                      {"omega_s_pu", c.omega_s_pu},
                      {"sigma_o_pu", pole_pair_json(c.sigma_o_pu)},
                      {"sigma_v_pu", pole_pair_json(c.sigma_v_pu)}};
    root["sim"] = {{"mode", c.mode},
                   {"controller_rate_hz", c.controller_rate_hz},
                   {"step_s", c.step_s},
                   {"output_rate_hz", c.output_rate_hz},
                   {"p_ramp_time_s", c.p_ramp_time_s},
                   {"hexfloat", c.hexfloat}};
    root["scenario"] = c.scenario;
    return root.dump(2);
}

Scenario parse_scenario_file(const std::string& json_text, const Config& base) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("scenario: malformed JSON: ") + e.what());
    }
    reject_unknown(root, {"name", "duration_s", "l_pu", "p_star_initial_pu", "events"},
                   "the scenario file");

    Scenario sc;
    sc.name = root.value("name", std::string("custom"));
    sc.duration = num(root, "duration_s", 0.7);
    sc.p_star_initial = num(root, "p_star_initial_pu", 0.0);
    base.apply_sim_options(sc);
    sc.plant.L_pu = num(root, "l_pu", base.l_pu);

    if (root.contains("events")) {
        if (!root["events"].is_array())
            throw std::runtime_error("scenario: \"events\" must be an array");
        for (const json& ev : root["events"]) {
            const std::string type = ev.value("type", std::string());
            if (type == "power_step") {
                reject_unknown(ev, {"type", "t_s", "p_star_pu"}, "a power_step event");
                sc.events.push_back(PowerStep{num(ev, "t_s", 0.0), num(ev, "p_star_pu", 0.0)});
            } else if (type == "freq_ramp") {
                reject_unknown(ev, {"type", "t_start_s", "t_end_s", "f_start_hz", "f_end_hz"},
                               "a freq_ramp event");
                sc.events.push_back(FreqRamp{num(ev, "t_start_s", 0.0), num(ev, "t_end_s", 0.0),
                                             num(ev, "f_start_hz", base.f_base_hz),
                                             num(ev, "f_end_hz", base.f_base_hz)});
            } else {
                throw std::runtime_error("scenario: event type must be power_step or freq_ramp");
            }
        }
    }
    return sc;
}

}  // namespace fluxgfm
