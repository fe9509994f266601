#pragma once

#include <functional>

#include "lagflow/types.hpp"

namespace lagflow {

enum class JetMode { Analytic, FiniteDifference };

// Second-order jet of an immersion at a parameter point. All pointwise
// geometric quantities are functions of this data alone.
struct Jet {
    double s = 0.0;
    double t = 0.0;
    Complex2 phi;
    Complex2 phi_s, phi_t;
    Complex2 phi_ss, phi_st, phi_tt;
};

using EvalFn = std::function<Complex2(double, double)>;

// Central finite-difference jet. 4th-order first derivatives and 2nd-order
// second derivatives; h = 1e-4 balances truncation against roundoff for
// surfaces of order-one curvature.
inline Jet fd_jet(const EvalFn& f, double s, double t, double h = 1e-4) {
    Jet j;
    j.s = s;
    j.t = t;
    j.phi = f(s, t);

    const Complex2 sp1 = f(s + h, t), sm1 = f(s - h, t);
    const Complex2 sp2 = f(s + 2 * h, t), sm2 = f(s - 2 * h, t);
    const Complex2 tp1 = f(s, t + h), tm1 = f(s, t - h);
    const Complex2 tp2 = f(s, t + 2 * h), tm2 = f(s, t - 2 * h);

    j.phi_s = (1.0 / (12.0 * h)) * (8.0 * (sp1 - sm1) - (sp2 - sm2));
    j.phi_t = (1.0 / (12.0 * h)) * (8.0 * (tp1 - tm1) - (tp2 - tm2));
    j.phi_ss = (1.0 / (h * h)) * (sp1 + sm1 - 2.0 * j.phi);
    j.phi_tt = (1.0 / (h * h)) * (tp1 + tm1 - 2.0 * j.phi);

    const Complex2 pp = f(s + h, t + h), pm = f(s + h, t - h);
    const Complex2 mp = f(s - h, t + h), mm = f(s - h, t - h);
    j.phi_st = (1.0 / (4.0 * h * h)) * ((pp - pm) - (mp - mm));
    return j;
}

}  // namespace lagflow
