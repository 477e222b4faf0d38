#pragma once

// Seeded random inputs: PSH quadratics, zero-trace PSH functions obtained by
// projecting them, and continuous (generally non-PSH) obstacles.

#include "qma/grid.hpp"
#include "qma/psh.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace qma {

using Rng = std::mt19937_64;

/// Real quadratic 0.5 x^T S x + b^T x + c on R^{4n}.
struct Quadratic {
    int n = 1;
    std::vector<double> S;  // row-major, symmetric
    std::vector<double> b;
    double c = 0.0;

    double operator()(std::span<const double> x) const {
        const auto d = b.size();
        double v = c;
        for (std::size_t i = 0; i < d; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < d; ++j) row += S[i * d + j] * x[j];
            v += 0.5 * x[i] * row + b[i] * x[i];
        }
        return v;
    }

    double least_eigenvalue() const { return least_quaternionic_eigenvalue(n, S); }

    GridField sample(const GridPtr& g) const {
        return GridField::sample(g, [this](std::span<const double> x) { return (*this)(x); });
    }
};

/// Random quadratic whose quaternionic Hessian has least eigenvalue >= margin:
/// Gaussian symmetric part shifted by t I (which moves every eigenvalue by 4t).
inline Quadratic random_psh_quadratic(int n, Rng& rng, double margin = 1.0, double linear = 0.5) {
    const auto d = static_cast<std::size_t>(4 * n);
    std::normal_distribution<double> N;
    Quadratic q{n, std::vector<double>(d * d), std::vector<double>(d), 0.0};
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) q.S[i * d + j] = q.S[j * d + i] = N(rng);
    const double lam = q.least_eigenvalue();
    const double t = std::max(0.0, (margin - lam) / 4.0);
    for (std::size_t i = 0; i < d; ++i) q.S[i * d + i] += t;
    for (auto& bi : q.b) bi = linear * N(rng);
    return q;
}

/// Continuous zero-trace negative PSH function P(max(Q - M, K rho)): M is the
/// maximum of Q on the non-interior nodes, rho the exhaustion function, and K
/// a random multiple of the factor that makes K rho the lower piece at its minimum.
inline GridField random_zero_trace_psh(const GridPtr& g, Rng& rng, double margin = 1.0,
                                       const EnvelopeOptions& opt = {}) {
    const Quadratic q = random_psh_quadratic(g->n(), rng, margin);
    GridField a = q.sample(g);
    double M = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g->size(); ++i)
        if (!g->interior(i)) M = std::max(M, a[i]);
    a += -M;
    const GridField rho = exhaustion_function(g, opt);
    const double K = std::uniform_real_distribution<double>(1.5, 3.0)(rng) * std::abs(a.min_value()) /
                     std::max(std::abs(rho.min_value()), 1e-300);
    GridField u = pointwise_max(a, K * rho);
    for (std::size_t i = 0; i < g->size(); ++i)
        if (!g->interior(i)) u[i] = 0.0;
    u = envelope(ObstacleSpec(u, GridField(g, 0.0)), opt, &u).u;
    return pointwise_min(u, GridField(g, 0.0));
}

/// Continuous obstacle: a few random cosines plus a random quadratic bowl, shifted to be <= 0 on average.
inline GridField random_continuous_obstacle(const GridPtr& g, Rng& rng) {
    const auto d = static_cast<std::size_t>(g->dim());
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> U(0.0, 2.0 * std::numbers::pi);
    constexpr int waves = 4;
    std::vector<std::vector<double>> k(waves, std::vector<double>(d));
    std::vector<double> amp(waves), phase(waves);
    for (int w = 0; w < waves; ++w) {
        for (auto& kk : k[static_cast<std::size_t>(w)]) kk = 2.0 * N(rng);
        amp[static_cast<std::size_t>(w)] = 0.15 * N(rng);
        phase[static_cast<std::size_t>(w)] = U(rng);
    }
    const double bowl = 0.5 + 0.5 * std::abs(N(rng));
    return GridField::sample(g, [&](std::span<const double> x) {
        double v = -0.6;
        for (std::size_t a = 0; a < d; ++a) v += 0.5 * bowl * x[a] * x[a] * (a % 2 == 0 ? 1.0 : -0.5);
        for (int w = 0; w < waves; ++w) {
            double arg = phase[static_cast<std::size_t>(w)];
            for (std::size_t a = 0; a < d; ++a) arg += k[static_cast<std::size_t>(w)][a] * x[a];
            v += amp[static_cast<std::size_t>(w)] * std::cos(arg);
        }
        return v;
    });
}

} // namespace qma
