#pragma once

// Quaternionic Hessian of a real polynomial and its Moore determinant.

#include "qma/error.hpp"
#include "qma/poly.hpp"
#include "qma/quaternion.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace qma {

/// n x n matrix [d^2 u / dq_j dq̄_k] with real polynomial components.
using HyperhermitianPoly = QuaternionMatrix<PolyField>;

/// Frozen ratio top_coefficient((Delta u)^n) / (n! Mdet(Hessian u)), indexed by n.
/// Established by exact computation on random quadratics (see the identity suite).
inline Rational moore_kappa(int n) {
    require(n == 1 || n == 2, "moore_kappa: only n = 1, 2 are calibrated");
    return Rational(1);
}

/// H_{jk} = sum_{a,b} e_a conj(e_b) d_{x_{4j+b}} d_{x_{4k+a}} u, i.e.
/// d/dq̄ multiplies units on the right and d/dq applies conjugate units on the right.
inline HyperhermitianPoly quaternionic_hessian(int n, const PolyField& u) {
    require(n >= 1 && n <= kMaxPolyN, "quaternionic_hessian: n out of range");
    require(u.is_real(), "quaternionic_hessian: u must be real-valued");
    HyperhermitianPoly h(n);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            auto acc = Quaternion<PolyField>::zero();
            for (int a = 0; a < 4; ++a) {
                PolyField da = u.derivative(4 * k + a);
                for (int b = 0; b < 4; ++b) {
                    PolyField dab = da.derivative(4 * j + b);
                    if (dab.is_zero()) continue;
                    Quaternion<Rational> unit = Quaternion<Rational>::unit(a) * Quaternion<Rational>::unit(b).conj();
                    for (std::size_t s = 0; s < 4; ++s)
                        if (unit.c[s] != 0) acc.c[s] += ComplexRational(unit.c[s]) * dab;
                }
            }
            h(j, k) = acc;
        }
    }
    return h;
}

namespace detail {

/// Cycles of sigma in Moore's normal form: each cycle starts at its smallest
/// element; cycles are listed in decreasing order of their first elements.
inline std::vector<std::vector<int>> moore_cycles(const std::vector<int>& sigma) {
    const int n = static_cast<int>(sigma.size());
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<int>> cycles;
    for (int start = 0; start < n; ++start) {
        if (seen[static_cast<std::size_t>(start)]) continue;
        std::vector<int> cyc;
        for (int k = start; !seen[static_cast<std::size_t>(k)]; k = sigma[static_cast<std::size_t>(k)]) {
            seen[static_cast<std::size_t>(k)] = 1;
            cyc.push_back(k);
        }
        cycles.push_back(std::move(cyc));  // starts at its minimum since start ascends
    }
    std::reverse(cycles.begin(), cycles.end());
    return cycles;
}

} // namespace detail

/// Moore determinant of a hyperhermitian matrix over a commutative ring T:
///   Mdet(M) = sum_sigma sgn(sigma) (M_{k11 k12} ... M_{k1l k11}) (M_{k21 k22} ...) ...
/// with sigma in Moore's cycle normal form. The value is real; its real part is returned.
template <typename T>
T moore_det(const QuaternionMatrix<T>& m) {
    require(m.size >= 1, "moore_det: empty matrix");
    require(m.is_hyperhermitian(), "moore_det: matrix is not hyperhermitian");
    const int n = m.size;
    std::vector<int> sigma(static_cast<std::size_t>(n));
    std::iota(sigma.begin(), sigma.end(), 0);
    Quaternion<T> total = Quaternion<T>::zero();
    do {
        const int sign = permutation_sign(sigma);
        Quaternion<T> prod = Quaternion<T>::unit(0);
        for (const auto& cyc : detail::moore_cycles(sigma)) {
            for (std::size_t t = 0; t < cyc.size(); ++t) {
                const int from = cyc[t];
                prod = prod * m(from, sigma[static_cast<std::size_t>(from)]);
            }
        }
        total = sign > 0 ? total + prod : total - prod;
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    return total.c[0];
}

inline PolyField moore_det(const HyperhermitianPoly& h) { return moore_det<PolyField>(h); }

/// Determinant of the 2n x 2n complex embedding by permutation expansion.
/// For hyperhermitian M this equals Mdet(M)^2.
template <typename T>
Complex<T> embedding_det(const QuaternionMatrix<T>& m) {
    const int dim = 2 * m.size;
    const auto e = complex_embedding(m);
    std::vector<int> sigma(static_cast<std::size_t>(dim));
    std::iota(sigma.begin(), sigma.end(), 0);
    Complex<T> total(ring_zero<T>(), ring_zero<T>());
    do {
        const int sign = permutation_sign(sigma);
        Complex<T> prod(ring_one<T>(), ring_zero<T>());
        for (int r = 0; r < dim; ++r) prod *= e[static_cast<std::size_t>(r * dim + sigma[static_cast<std::size_t>(r)])];
        total = sign > 0 ? total + prod : total - prod;
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    return total;
}

/// Mixed Moore determinant det(u_1, ..., u_n) of the Hessians by polarization:
///   det(u_1..u_n) = (1/n!) sum_{S subset} (-1)^{n-|S|} det(sum_{i in S} u_i).
inline PolyField mixed_moore_det(int n, std::span<const PolyField> us) {
    require(us.size() == static_cast<std::size_t>(n), "mixed_moore_det: need n functions");
    PolyField acc(n);
    const unsigned subsets = 1u << n;
    Rational fact(1);
    for (int k = 2; k <= n; ++k) fact *= k;
    for (unsigned s = 1; s < subsets; ++s) {
        PolyField sum(n);
        int size = 0;
        for (int i = 0; i < n; ++i)
            if (s & (1u << i)) {
                sum += us[static_cast<std::size_t>(i)];
                ++size;
            }
        PolyField d = moore_det(quaternionic_hessian(n, sum));
        acc += ((n - size) % 2 == 0) ? d : -d;
    }
    return ComplexRational(Rational(1) / fact) * acc;
}

} // namespace qma
