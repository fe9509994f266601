#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace lagflow {

using Complex = std::complex<double>;

// Point (or tangent vector) of C^2 = R^4 in complex coordinates (z1, z2).
// The complex structure J is componentwise multiplication by i; the Euclidean
// metric is the real part of the Hermitian product and the Kaehler form is
// minus its imaginary part, so omega(u, v) = <J u, v>.
struct Complex2 {
    Complex z1{0.0, 0.0};
    Complex z2{0.0, 0.0};

    Complex2& operator+=(const Complex2& o) { z1 += o.z1; z2 += o.z2; return *this; }
    Complex2& operator-=(const Complex2& o) { z1 -= o.z1; z2 -= o.z2; return *this; }
    Complex2& operator*=(double c) { z1 *= c; z2 *= c; return *this; }
};

inline Complex2 operator+(Complex2 a, const Complex2& b) { return a += b; }
inline Complex2 operator-(Complex2 a, const Complex2& b) { return a -= b; }
inline Complex2 operator*(double c, Complex2 a) { return a *= c; }
inline Complex2 operator*(Complex2 a, double c) { return a *= c; }
inline Complex2 operator-(const Complex2& a) { return {-a.z1, -a.z2}; }

// (a, b) = a1 conj(b1) + a2 conj(b2)
inline Complex hermitian(const Complex2& a, const Complex2& b) {
    return a.z1 * std::conj(b.z1) + a.z2 * std::conj(b.z2);
}

inline double inner(const Complex2& a, const Complex2& b) { return hermitian(a, b).real(); }

// omega(a, b) = -Im (a, b) = <J a, b>
inline double kaehler(const Complex2& a, const Complex2& b) { return -hermitian(a, b).imag(); }

inline Complex2 applyJ(const Complex2& a) {
    return {Complex(0.0, 1.0) * a.z1, Complex(0.0, 1.0) * a.z2};
}

inline double norm2(const Complex2& a) { return std::norm(a.z1) + std::norm(a.z2); }
inline double norm(const Complex2& a) { return std::sqrt(norm2(a)); }

inline std::array<double, 4> to_r4(const Complex2& a) {
    return {a.z1.real(), a.z1.imag(), a.z2.real(), a.z2.imag()};
}

inline Complex2 from_r4(const std::array<double, 4>& v) {
    return {Complex(v[0], v[1]), Complex(v[2], v[3])};
}

// Complexified tangent vector of R^4, used for the (1,0)/(0,1) splitting of
// derivatives (phi_z, phi_zbar) and the C-trilinear cubic form. Stored in real
// coordinates so the bilinear dot product is a plain componentwise sum, with
// no hidden conjugation.
struct CVec4 {
    std::array<Complex, 4> c{};

    static CVec4 lift(const Complex2& v) {
        auto r = to_r4(v);
        return {{Complex(r[0]), Complex(r[1]), Complex(r[2]), Complex(r[3])}};
    }

    CVec4& operator+=(const CVec4& o) {
        for (int i = 0; i < 4; ++i) c[i] += o.c[i];
        return *this;
    }
    CVec4& operator*=(Complex w) {
        for (auto& x : c) x *= w;
        return *this;
    }
};

inline CVec4 operator+(CVec4 a, const CVec4& b) { return a += b; }
inline CVec4 operator*(Complex w, CVec4 a) { return a *= w; }

// C-bilinear extension of the Euclidean inner product.
inline Complex cdot(const CVec4& a, const CVec4& b) {
    Complex r = 0.0;
    for (int i = 0; i < 4; ++i) r += a.c[i] * b.c[i];
    return r;
}

// J in real coordinates: (x1, y1, x2, y2) -> (-y1, x1, -y2, x2).
inline CVec4 applyJ(const CVec4& a) {
    return {{-a.c[1], a.c[0], -a.c[3], a.c[2]}};
}

// Base error carrying a machine-readable kind, surfaced as-is by the CLI.
struct Error : std::runtime_error {
    std::string kind;
    Error(std::string k, const std::string& msg) : std::runtime_error(msg), kind(std::move(k)) {}
};

struct DegenerateMetric : Error {
    explicit DegenerateMetric(const std::string& m) : Error("DegenerateMetric", m) {}
};
struct NotLagrangian : Error {
    explicit NotLagrangian(const std::string& m) : Error("NotLagrangian", m) {}
};
struct NotConformal : Error {
    explicit NotConformal(const std::string& m) : Error("NotConformal", m) {}
};
struct BadParams : Error {
    explicit BadParams(const std::string& m) : Error("BadParams", m) {}
};
struct WrongFamily : Error {
    explicit WrongFamily(const std::string& m) : Error("WrongFamily", m) {}
};
struct NotHSL : Error {
    explicit NotHSL(const std::string& m) : Error("NotHSL", m) {}
};
struct NoExtremum : Error {
    explicit NoExtremum(const std::string& m) : Error("NoExtremum", m) {}
};
struct OutOfRange : Error {
    explicit OutOfRange(const std::string& m) : Error("OutOfRange", m) {}
};
struct StepTooLarge : Error {
    explicit StepTooLarge(const std::string& m) : Error("StepTooLarge", m) {}
};
struct Blowup : Error {
    explicit Blowup(const std::string& m) : Error("Blowup", m) {}
};
struct ScaleCollapse : Error {
    explicit ScaleCollapse(const std::string& m) : Error("ScaleCollapse", m) {}
};
struct BadResolution : Error {
    explicit BadResolution(const std::string& m) : Error("BadResolution", m) {}
};

}  // namespace lagflow
