#pragma once

#include <iosfwd>
#include <string>

#include "fluxgfm/scenarios.hpp"
#include "fluxgfm/smallsignal.hpp"

namespace fluxgfm {

/// Formats a double either as a round-trip-exact decimal (%.17g) or as a
/// hex-float (%a). Both read back bit-identically; the decimal form is the
/// default because it diffs and plots without tooling.
std::string format_double(double v, bool hexfloat = false);

/// Header: t,p,V,V_hat,omega_c,omega_g,delta,i_d,i_q,u_c_d,u_c_q,
///         psi_hat_d,psi_hat_q,e_d,e_q
void write_timeseries_csv(std::ostream& os, const TimeSeries& ts, bool hexfloat = false);

/// Header: L_pu,re_1,im_1,...,re_7,im_7 with eigenvalues in the Spectrum sort
/// order. Samples without an equilibrium are omitted from the table.
void write_pole_sweep_csv(std::ostream& os, const PoleSweepResult& sweep,
                          bool hexfloat = false);

}  // namespace fluxgfm
