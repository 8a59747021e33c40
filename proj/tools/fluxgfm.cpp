// fluxgfm - gain design, small-signal analysis and scenario simulation for a
// virtual-flux grid-forming converter controller.
//
// Exit codes: 0 success, 2 infeasible power set-point, 3 gain placement
// failure, 4 unstable samples in a pole sweep, 5 simulation divergence,
// 6 no operating point.

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fluxgfm/config.hpp"
#include "fluxgfm/csv.hpp"
#include "fluxgfm/scenarios.hpp"
#include "fluxgfm/smallsignal.hpp"
#include "fluxgfm/tuning.hpp"

namespace fs = std::filesystem;
using namespace fluxgfm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitPlacement = 3;
constexpr int kExitUnstable = 4;
constexpr int kExitDiverged = 5;
constexpr int kExitNoEquilibrium = 6;

std::string fmt(double v) { return format_double(v, false); }

std::string fmt_complex(Complex z) {
    std::ostringstream os;
    os << fmt(z.real()) << (z.imag() < 0 ? " - " : " + ") << fmt(std::abs(z.imag())) << "i";
    return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

double rel_err(double got, double want, double scale) {
    return std::abs(got - want) / std::max(1.0, std::abs(scale));
}

// ---------------------------------------------------------------------------
// gains
// ---------------------------------------------------------------------------

int cmd_gains(const Config& cfg, const std::string& out_dir) {
    const TuningSpec spec = cfg.tuning_spec();
    Design d;
    ObserverGain og;
    try {
        d = full_design(spec);
        og = design_K_o(spec, d.setpoints);
    } catch (const InfeasibleSetpoint& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlacement;
    }

    const double w0 = spec.omega0;
    std::ostringstream os;
    os << "gain design at p* = " << fmt(spec.p_star) << " pu, L0 = " << fmt(spec.L0_pu)
       << " pu, f0 = " << fmt(cfg.f_base_hz) << " Hz (" << fmt(w0) << " rad/s)\n\n";
    os << "operating point\n";
    os << "  delta*   = " << fmt(d.setpoints.delta_star) << " rad\n";
    os << "  u_c*     = [" << fmt(d.setpoints.u_c_star.d) << ", " << fmt(d.setpoints.u_c_star.q)
       << "] pu\n";
    os << "  u_g*     = [" << fmt(d.setpoints.u_g_star.d) << ", " << fmt(d.setpoints.u_g_star.q)
       << "] pu\n";
    os << "  psi_g*   = [" << fmt(d.setpoints.psi_g_star.d) << ", "
       << fmt(d.setpoints.psi_g_star.q) << "] pu*s\n";
    os << "  psi*     = [" << fmt(d.setpoints.psi_star.d) << ", " << fmt(d.setpoints.psi_star.q)
       << "] pu*s\n\n";
    os << "gains\n";
    os << "  k_o = [" << fmt(og.k_o.d) << ", " << fmt(og.k_o.q) << "]\n";
    os << "  K_o = [[" << fmt(og.K_o.m00) << ", " << fmt(og.K_o.m01) << "], [" << fmt(og.K_o.m10)
       << ", " << fmt(og.K_o.m11) << "]]\n";
    os << "  k_p = [" << fmt(d.gains.k_p.d) << ", " << fmt(d.gains.k_p.q) << "]\n";
    os << "  k_i = [" << fmt(d.gains.k_i.d) << ", " << fmt(d.gains.k_i.q) << "]\n";
    os << "  k_v = [" << fmt(d.gains.k_v.d) << ", " << fmt(d.gains.k_v.q) << "]\n\n";

    const Mat2 a_o = (-w0) * kJ - d.gains.K_o;
    const Mat2 a_v = (-w0) * kJ - outer(d.gains.k_v, {0.0, -w0});
    const auto eig_o = eig2(a_o.m00, a_o.m01, a_o.m10, a_o.m11);
    const auto eig_v = eig2(a_v.m00, a_v.m01, a_v.m10, a_v.m11);
    os << "placed poles (rad/s)\n";
    os << "  flux observer: " << fmt_complex(eig_o[0]) << ", " << fmt_complex(eig_o[1]) << "\n";
    os << "  voltage loop:  " << fmt_complex(eig_v[0]) << ", " << fmt_complex(eig_v[1]) << "\n\n";

    // identity residuals, all relative to their natural scales
    const SyncCoeffs sync = sync_tf_coeffs(d.gains.k_p, d.setpoints, w0);
    const Vec2 ki_resid = d.gains.k_i - design_k_i(d.gains.k_p, d.gains.K_o, w0);
    const double checks[] = {
        rel_err(a_o.trace(), spec.sigma_o.sum().real(), spec.sigma_o.sum().real()),
        rel_err(a_o.det(), spec.sigma_o.product().real(), spec.sigma_o.product().real()),
        rel_err(a_v.trace(), spec.sigma_v.sum().real(), spec.sigma_v.sum().real()),
        rel_err(a_v.det(), spec.sigma_v.product().real(), spec.sigma_v.product().real()),
        rel_err(-sync.a1, 2.0 * spec.zeta * spec.omega_s, spec.omega_s),
        rel_err(-sync.a2, spec.omega_s * spec.omega_s, spec.omega_s * spec.omega_s),
        norm(ki_resid) / std::max(1.0, norm(d.gains.k_i)),
    };
    const char* names[] = {"sigma_o trace", "sigma_o det", "sigma_v trace", "sigma_v det",
                           "D1 damping",    "D1 stiffness", "k_i identity"};
    bool ok = true;
    os << "identity residuals (relative)\n";
    for (int k = 0; k < 7; ++k) {
        os << "  " << names[k] << ": " << fmt(checks[k]) << "\n";
        if (!(checks[k] < 1e-9)) ok = false;
    }
    os << "\nall residuals " << (ok ? "below" : "ABOVE") << " 1e-9\n";

    std::cout << os.str();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "gains.txt", os.str());
    }
    return ok ? kExitOk : kExitPlacement;
}

// ---------------------------------------------------------------------------
// eig-sweep
// ---------------------------------------------------------------------------

std::string sweep_gnuplot(const std::string& csv_name) {
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set terminal pngcairo size 900,700\n"
       << "set output 'pole_sweep.png'\n"
       << "set xlabel 'Re (rad/s)'\n"
       << "set ylabel 'Im (rad/s)'\n"
       << "set grid\n"
       << "set key off\n"
       << "plot for [i=0:6] '" << csv_name
       << "' every ::1 using (column(2+2*i)):(column(3+2*i)) with points pt 7 ps 0.6\n";
    return os.str();
}

int cmd_eig_sweep(const Config& cfg, const std::string& out_dir, double l_min, double l_max,
                  int n_points) {
    if (!(l_min > 0.0) || !(l_max > l_min) || n_points < 1) {
        std::cerr << "error: need 0 < lmin < lmax and points >= 1\n";
        return kExitPlacement;
    }
    Design d;
    try {
        d = full_design(cfg.tuning_spec());
    } catch (const InfeasibleSetpoint& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlacement;
    }
    PlantParams plant = cfg.plant_params();
    PlantParams nominal = plant;
    nominal.L_pu = cfg.l0_pu;

    std::vector<double> Ls(static_cast<std::size_t>(n_points));
    for (int k = 0; k < n_points; ++k)
        Ls[static_cast<std::size_t>(k)] =
            n_points == 1 ? l_min : l_min + (l_max - l_min) * k / (n_points - 1);

    const PoleSweepResult sweep = pole_sweep(d.gains, d.setpoints, plant, nominal, Ls);

    const double zero_tol = 1e-6 * d.gains.omega0;
    std::vector<std::string> unstable;
    for (const SweepSample& s : sweep.samples) {
        if (!s.ok) {
            unstable.push_back("L = " + fmt(s.L_pu) + " pu: " + s.error);
            continue;
        }
        const Complex dom = dominant_pole(s.spectrum, zero_tol);
        std::cout << "L = " << fmt(s.L_pu) << " pu: dominant pole " << fmt_complex(dom)
                  << " rad/s\n";
        for (const Complex& lam : s.spectrum.values)
            if (std::abs(lam) > zero_tol && lam.real() >= 0.0)
                unstable.push_back("L = " + fmt(s.L_pu) + " pu: pole at " + fmt_complex(lam));
    }

    const fs::path dir = out_dir.empty() ? "." : out_dir;
    fs::create_directories(dir);
    {
        std::ofstream csv(dir / "pole_sweep.csv", std::ios::binary);
        write_pole_sweep_csv(csv, sweep, cfg.hexfloat);
    }
    write_file(dir / "pole_sweep.gp", sweep_gnuplot("pole_sweep.csv"));
    std::cout << "wrote " << (dir / "pole_sweep.csv").string() << " and "
              << (dir / "pole_sweep.gp").string() << "\n";

    if (!unstable.empty()) {
        std::cerr << "unstable or unsolved samples:\n";
        for (const std::string& line : unstable) std::cerr << "  " << line << "\n";
        return kExitUnstable;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

std::string timeseries_gnuplot(const std::string& csv_name, const std::string& stem) {
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set terminal pngcairo size 1000,900\n"
       << "set output '" << stem << ".png'\n"
       << "set grid\n"
       << "set multiplot layout 3,1\n"
       << "set ylabel 'p (pu)'\n"
       << "plot '" << csv_name << "' every ::1 using 1:2 with lines lw 2 title 'p'\n"
       << "set ylabel 'V (pu)'\n"
       << "plot '" << csv_name << "' every ::1 using 1:3 with lines lw 2 title 'V', '"
       << csv_name << "' every ::1 using 1:4 with lines title 'V est'\n"
       << "set ylabel 'f (Hz)'\n"
       << "set xlabel 't (s)'\n"
       << "plot '" << csv_name << "' every ::1 using 1:($5/(2*pi)) with lines lw 2 "
       << "title 'f_c', '" << csv_name << "' every ::1 using 1:($6/(2*pi)) with lines "
       << "title 'f_g'\n"
       << "unset multiplot\n";
    return os.str();
}

nlohmann::json metrics_json(const Scenario& sc, const ScenarioMetrics& m) {
    nlohmann::json j;
    j["scenario"] = sc.name;
    j["l_pu"] = sc.plant.L_pu;
    nlohmann::json steps = nlohmann::json::array();
    for (const StepMetric& st : m.steps)
        steps.push_back({{"t_event_s", st.t_event},
                         {"p_target_pu", st.p_target},
                         {"p_steady_pu", st.p_steady},
                         {"settling_time_2pct_s", st.settling_time_2pct},
                         {"overshoot_pu", st.overshoot}});
    j["steps"] = steps;
    j["overshoot_pu"] = m.overshoot;
    j["v_excursion_max_pu"] = m.v_excursion_max;
    j["steady_p_offset_pu"] = m.steady_p_offset;
    if (m.D_p.has_value()) j["droop_d_p_pu"] = *m.D_p;
    return j;
}

int cmd_simulate(const Config& cfg, const std::string& out_dir, const std::string& name,
                 const std::string& scenario_file) {
    Scenario sc;
    try {
        if (!scenario_file.empty()) {
            std::ifstream in(scenario_file);
            if (!in) {
                std::cerr << "error: cannot open " << scenario_file << "\n";
                return kExitPlacement;
            }
            std::ostringstream ss;
            ss << in.rdbuf();
            sc = parse_scenario_file(ss.str(), cfg);
        } else {
            sc = cfg.make_scenario(name.empty() ? cfg.scenario : name);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlacement;
    }

    TimeSeries ts;
    try {
        ts = simulate(sc);
    } catch (const InfeasibleSetpoint& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const NonFiniteState& e) {
        std::cerr << "error: simulation diverged at t = " << fmt(e.t) << " s: " << e.what()
                  << "\n";
        return kExitDiverged;
    }

    const fs::path dir = out_dir.empty() ? "." : out_dir;
    fs::create_directories(dir);
    const std::string stem = sc.name;
    {
        std::ofstream csv(dir / (stem + "_timeseries.csv"), std::ios::binary);
        write_timeseries_csv(csv, ts, cfg.hexfloat);
    }
    write_file(dir / (stem + "_plot.gp"), timeseries_gnuplot(stem + "_timeseries.csv", stem));

    std::ostringstream report;
    try {
        const ScenarioMetrics m = extract_metrics(ts, sc);
        const nlohmann::json j = metrics_json(sc, m);
        write_file(dir / (stem + "_metrics.json"), j.dump(2) + "\n");
        report << j.dump(2) << "\n";
    } catch (const NoSteadyState& e) {
        report << "warning: " << e.what() << " (no metrics written)\n";
    }
    std::cout << report.str();
    std::cout << "wrote " << (dir / (stem + "_timeseries.csv")).string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// linearize
// ---------------------------------------------------------------------------

int cmd_linearize(const Config& cfg, const std::string& out_dir, double l_pu) {
    Design d;
    try {
        d = full_design(cfg.tuning_spec());
    } catch (const InfeasibleSetpoint& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlacement;
    }
    PlantParams plant = cfg.plant_params();
    if (l_pu > 0.0) plant.L_pu = l_pu;
    PlantParams nominal = plant;
    nominal.L_pu = cfg.l0_pu;

    try {
        const ClosedLoopModel model =
            closed_loop_matrix(d.gains, d.setpoints, plant, nominal, d.gains.omega0);

        std::ostringstream os;
        os << "closed-loop model at L = " << fmt(plant.L_pu) << " pu, L0 = " << fmt(cfg.l0_pu)
           << " pu, f_g = " << fmt(model.omega_g / (2.0 * std::numbers::pi)) << " Hz ("
           << fmt(model.omega_g) << " rad/s)\n\n";
        os << "operating point: p = " << fmt(model.equilibrium.p) << " pu, V = "
           << fmt(model.equilibrium.V) << " pu, delta = " << fmt(model.equilibrium.delta)
           << " rad, residual = " << fmt(model.equilibrium.residual) << "\n\n";
        os << "state matrix A (rad/s), states:";
        for (const char* l : model.labels) os << " " << l;
        os << "\n";
        for (int r = 0; r < 7; ++r) {
            os << "  [";
            for (int c = 0; c < 7; ++c) os << (c ? ", " : "") << fmt(model.A(r, c));
            os << "]\n";
        }

        const Spectrum s = eig_small(model.A);
        const double zero_tol = 1e-6 * d.gains.omega0;
        const int zero_idx = structural_zero_index(s, zero_tol);
        os << "\neigenvalues (rad/s):\n";
        for (std::size_t k = 0; k < s.values.size(); ++k) {
            os << "  " << fmt_complex(s.values[k]);
            if (static_cast<int>(k) == zero_idx) os << "   <- structural zero mode";
            os << "\n";
        }
        const double dev = jacobian_deviation(model, d.gains, d.setpoints, plant, nominal);
        os << "\nanalytic vs numeric Jacobian: max deviation " << fmt(dev) << " (tolerance "
           << fmt(1e-6 * std::max(1.0, model.A.norm_inf())) << ")\n";

        std::cout << os.str();
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            write_file(fs::path(out_dir) / "linearize.txt", os.str());
        }
    } catch (const NoEquilibrium& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoEquilibrium;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"virtual-flux grid-forming converter control toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    app.add_option("--config", config_path, "JSON configuration file")->expected(1);
    app.add_option("--out", out_dir, "output directory for generated files")->expected(1);

    auto* gains = app.add_subcommand("gains", "run the gain design and report identities");

    auto* sweep = app.add_subcommand("eig-sweep", "closed-loop pole trajectories over L");
    double l_min = 0.1, l_max = 1.0;
    int n_points = 19;
    sweep->add_option("--lmin", l_min, "smallest inductance, pu");
    sweep->add_option("--lmax", l_max, "largest inductance, pu");
    sweep->add_option("--points", n_points, "number of sweep samples");

    auto* sim = app.add_subcommand("simulate", "run a time-domain scenario");
    std::string scenario_name;
    std::string scenario_file;
    sim->add_option("scenario", scenario_name,
                    "standard scenario name (step_L050, step_L100, step_L010, framp_L050)");
    sim->add_option("--scenario-file", scenario_file, "custom scenario JSON");

    auto* lin = app.add_subcommand("linearize", "equilibrium, state matrix and spectrum");
    double l_pu = -1.0;
    lin->add_option("--L", l_pu, "actual inductance, pu (defaults to the config value)");

    CLI11_PARSE(app, argc, argv);

    Config cfg;
    try {
        if (!config_path.empty()) cfg = load_config_file(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlacement;
    }

    try {
        if (gains->parsed()) return cmd_gains(cfg, out_dir);
        if (sweep->parsed()) return cmd_eig_sweep(cfg, out_dir, l_min, l_max, n_points);
        if (sim->parsed()) return cmd_simulate(cfg, out_dir, scenario_name, scenario_file);
        if (lin->parsed()) return cmd_linearize(cfg, out_dir, l_pu);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
