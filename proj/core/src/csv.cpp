#include "fluxgfm/csv.hpp"

#include <cstdio>
#include <ostream>

namespace fluxgfm {

std::string format_double(double v, bool hexfloat) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), hexfloat ? "%a" : "%.17g", v);
    return buf;
}

void write_timeseries_csv(std::ostream& os, const TimeSeries& ts, bool hexfloat) {
    os << "t,p,V,V_hat,omega_c,omega_g,delta,i_d,i_q,u_c_d,u_c_q,psi_hat_d,psi_hat_q,e_d,e_q\n";
    for (std::size_t k = 0; k < ts.size(); ++k) {
        os << format_double(ts.t[k], hexfloat) << ',' << format_double(ts.p[k], hexfloat)
           << ',' << format_double(ts.V[k], hexfloat) << ','
           << format_double(ts.V_hat[k], hexfloat) << ','
           << format_double(ts.omega_c[k], hexfloat) << ','
           << format_double(ts.omega_g[k], hexfloat) << ','
           << format_double(ts.delta[k], hexfloat) << ','
           << format_double(ts.i_d[k], hexfloat) << ',' << format_double(ts.i_q[k], hexfloat)
           << ',' << format_double(ts.u_c_d[k], hexfloat) << ','
           << format_double(ts.u_c_q[k], hexfloat) << ','
           << format_double(ts.psi_hat_d[k], hexfloat) << ','
           << format_double(ts.psi_hat_q[k], hexfloat) << ','
           << format_double(ts.e_d[k], hexfloat) << ','
           << format_double(ts.e_q[k], hexfloat) << '\n';
    }
}

void write_pole_sweep_csv(std::ostream& os, const PoleSweepResult& sweep, bool hexfloat) {
    os << "L_pu";
    for (int k = 1; k <= 7; ++k) os << ",re_" << k << ",im_" << k;
    os << '\n';
    for (const SweepSample& s : sweep.samples) {
        if (!s.ok) continue;
        os << format_double(s.L_pu, hexfloat);
        for (const Complex& lam : s.spectrum.values)
            os << ',' << format_double(lam.real(), hexfloat) << ','
               << format_double(lam.imag(), hexfloat);
        os << '\n';
    }
}

}  // namespace fluxgfm
