#pragma once

#include <gmpxx.h>

#include <complex>
#include <ostream>
#include <sstream>
#include <string>

namespace qma {

using Rational = mpq_class;

/// Minimal complex number over an arbitrary ring. std::complex is only
/// specified for floating types, and the exact backend needs rationals.
template <typename T>
struct Complex {
    T re{};
    T im{};

    Complex() = default;
    Complex(T r) : re(std::move(r)), im(0) {}  // NOLINT: implicit lift from the real line
    Complex(T r, T i) : re(std::move(r)), im(std::move(i)) {}

    static Complex i() { return Complex(T(0), T(1)); }

    Complex conj() const { return {re, -im}; }
    bool is_zero() const { return re == 0 && im == 0; }

    Complex& operator+=(const Complex& o) { re += o.re; im += o.im; return *this; }
    Complex& operator-=(const Complex& o) { re -= o.re; im -= o.im; return *this; }
    Complex& operator*=(const Complex& o) {
        T r = re * o.re - im * o.im;
        T i = re * o.im + im * o.re;
        re = std::move(r);
        im = std::move(i);
        return *this;
    }

    friend Complex operator+(Complex a, const Complex& b) { return a += b; }
    friend Complex operator-(Complex a, const Complex& b) { return a -= b; }
    friend Complex operator*(Complex a, const Complex& b) { return a *= b; }
    friend Complex operator-(const Complex& a) { return {-a.re, -a.im}; }
    friend bool operator==(const Complex& a, const Complex& b) { return a.re == b.re && a.im == b.im; }
    friend bool operator!=(const Complex& a, const Complex& b) { return !(a == b); }

    friend std::ostream& operator<<(std::ostream& os, const Complex& z) {
        os << z.re;
        if (z.im != 0) os << (z.im < 0 ? "-" : "+") << (z.im < 0 ? T(-z.im) : z.im) << "i";
        return os;
    }
};

using ComplexRational = Complex<Rational>;

/// Additive and multiplicative identities for ring types whose constructors
/// do not take a numeric literal (polynomials carry a dimension instead).
template <typename T>
struct RingTraits {
    static T zero() { return T(0); }
    static T one() { return T(1); }
};

template <typename T>
T ring_zero() { return RingTraits<T>::zero(); }
template <typename T>
T ring_one() { return RingTraits<T>::one(); }

/// Zero test used by the sparse containers; specialized per scalar kind.
inline bool is_zero(const Rational& x) { return sgn(x) == 0; }
inline bool is_zero(double x) { return x == 0.0; }
template <typename T>
bool is_zero(const Complex<T>& z) { return z.is_zero(); }
template <typename T>
bool is_zero(const std::complex<T>& z) { return z == std::complex<T>{}; }

template <typename T>
std::string to_string(const T& x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

inline double to_double(const Rational& q) { return q.get_d(); }

} // namespace qma
