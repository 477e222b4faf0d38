#pragma once

#include "qma/error.hpp"
#include "qma/scalar.hpp"

#include <array>
#include <complex>
#include <vector>

namespace qma {

/// q = a + b i + c j + d k over a commutative ring T.
template <typename T>
struct Quaternion {
    std::array<T, 4> c{};

    Quaternion() = default;
    Quaternion(T a, T b, T cc, T d) : c{std::move(a), std::move(b), std::move(cc), std::move(d)} {}

    /// Basis unit e_0 = 1, e_1 = i, e_2 = j, e_3 = k.
    static Quaternion unit(int a) {
        Quaternion q;
        for (int k = 0; k < 4; ++k) q.c[static_cast<std::size_t>(k)] = (k == a) ? ring_one<T>() : ring_zero<T>();
        return q;
    }

    static Quaternion zero() { return {ring_zero<T>(), ring_zero<T>(), ring_zero<T>(), ring_zero<T>()}; }

    const T& re() const { return c[0]; }

    Quaternion conj() const { return {c[0], -c[1], -c[2], -c[3]}; }

    bool is_real() const { return is_zero(c[1]) && is_zero(c[2]) && is_zero(c[3]); }

    T norm2() const { return c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]; }

    Quaternion& operator+=(const Quaternion& o) {
        for (std::size_t k = 0; k < 4; ++k) c[k] += o.c[k];
        return *this;
    }
    Quaternion& operator-=(const Quaternion& o) {
        for (std::size_t k = 0; k < 4; ++k) c[k] -= o.c[k];
        return *this;
    }
    friend Quaternion operator+(Quaternion a, const Quaternion& b) { return a += b; }
    friend Quaternion operator-(Quaternion a, const Quaternion& b) { return a -= b; }
    friend Quaternion operator-(const Quaternion& a) { return {-a.c[0], -a.c[1], -a.c[2], -a.c[3]}; }

    friend Quaternion operator*(const Quaternion& x, const Quaternion& y) {
        const auto& a = x.c;
        const auto& b = y.c;
        return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
    }

    /// Scales by a ring element.
    friend Quaternion operator*(const T& s, const Quaternion& q) {
        return {s * q.c[0], s * q.c[1], s * q.c[2], s * q.c[3]};
    }

    friend bool operator==(const Quaternion& x, const Quaternion& y) { return x.c == y.c; }
};

/// Square matrix of quaternions, row-major.
template <typename T>
struct QuaternionMatrix {
    int size = 0;
    std::vector<Quaternion<T>> entries;

    explicit QuaternionMatrix(int n = 0) : size(n), entries(static_cast<std::size_t>(n * n)) {}

    Quaternion<T>& operator()(int r, int c) { return entries[static_cast<std::size_t>(r * size + c)]; }
    const Quaternion<T>& operator()(int r, int c) const { return entries[static_cast<std::size_t>(r * size + c)]; }

    /// M_{kj} = conj(M_{jk}) for all j, k (diagonal therefore real).
    bool is_hyperhermitian() const {
        for (int j = 0; j < size; ++j)
            for (int k = 0; k < size; ++k)
                if (!((*this)(k, j) == (*this)(j, k).conj())) return false;
        return true;
    }
};

/// Complex 2x2 block of q = z1 + z2 j with z1 = a + b i, z2 = c + d i:
///   [  z1      z2  ]
///   [ -conj(z2) conj(z1) ]
/// The map is an injective ring homomorphism H -> C^{2x2}.
template <typename T>
std::array<Complex<T>, 4> complex_block(const Quaternion<T>& q) {
    Complex<T> z1(q.c[0], q.c[1]);
    Complex<T> z2(q.c[2], q.c[3]);
    return {z1, z2, -z2.conj(), z1.conj()};
}

/// 2n x 2n complex embedding of an n x n quaternion matrix, row-major.
template <typename T>
std::vector<Complex<T>> complex_embedding(const QuaternionMatrix<T>& m) {
    const int n = m.size;
    std::vector<Complex<T>> out(static_cast<std::size_t>(4 * n * n));
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            auto blk = complex_block(m(r, c));
            const int dim = 2 * n;
            out[static_cast<std::size_t>((2 * r) * dim + 2 * c)] = blk[0];
            out[static_cast<std::size_t>((2 * r) * dim + 2 * c + 1)] = blk[1];
            out[static_cast<std::size_t>((2 * r + 1) * dim + 2 * c)] = blk[2];
            out[static_cast<std::size_t>((2 * r + 1) * dim + 2 * c + 1)] = blk[3];
        }
    return out;
}

} // namespace qma
