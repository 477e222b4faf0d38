#include "qma/grid.hpp"
#include "qma/identities.hpp"
#include "qma/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace qma;

namespace {

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

/// Real quadratic with dyadic coefficients: every grid operation on it is exact in binary.
PolyField dyadic_quadratic(int n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> num(-4, 4);
    PolyField u(n);
    for (int a = 0; a < 4 * n; ++a)
        for (int b = a; b < 4 * n; ++b) {
            const int k = num(rng);
            if (k == 0) continue;
            u += PolyField::constant(n, ComplexRational(Rational(k, 4))) * PolyField::variable(n, a) *
                 PolyField::variable(n, b);
        }
    u += PolyField::constant(n, ComplexRational(Rational(num(rng), 2))) * PolyField::variable(n, 0);
    return u;
}

std::complex<double> to_complex(const ComplexRational& c) { return {c.re.get_d(), c.im.get_d()}; }

double ulps_apart(double a, double b) {
    if (a == b) return 0.0;
    const double scale = std::max(std::abs(a), std::abs(b));
    return std::abs(a - b) / (scale * std::numeric_limits<double>::epsilon());
}

} // namespace

TEST(Grid, Validation) {
    EXPECT_THROW(Grid::cube(1, 4, -1, 1), DomainError);
    EXPECT_THROW(Grid::cube(1, 6, -1, 1), DomainError);
    EXPECT_THROW(Grid::cube(3, 5, -1, 1), DomainError);
    EXPECT_THROW(Grid::cube(1, 5, 1, -1), DomainError);
    auto g = Grid::cube(1, 5, -1, 1);
    EXPECT_EQ(g->size(), 625u);
    EXPECT_EQ(g->interior_nodes().size(), 81u);
    EXPECT_DOUBLE_EQ(g->h(0), 0.5);
    EXPECT_DOUBLE_EQ(g->coord(g->center(), 2), 0.0);
}

TEST(Grid, BallDomainInterior) {
    auto g = Grid::cube(1, 9, -1, 1, Region::ball({0, 0, 0, 0}, 1.0));
    for (std::uint32_t i : g->interior_nodes()) EXPECT_LE(norm2(g->coords(i)), 1.0);
    EXPECT_LT(g->interior_nodes().size(), 7u * 7 * 7 * 7);
}

TEST(FdBaston, ZeroAndAffine) {
    auto g = Grid::cube(1, 7, -1, 1);
    GridField zero(g);
    GridField affine = GridField::sample(g, [](std::span<const double> x) { return 3 * x[0] - 2 * x[3] + 1; });
    for (const auto* f : {&zero, &affine}) {
        auto b = fd_baston_coeffs(*f);
        for (const auto& v : b.values) EXPECT_LT(std::abs(v), 1e-12);
    }
}

TEST(FdBaston, ExactOnDyadicQuadratics) {
    std::mt19937_64 rng(11);
    for (int n = 1; n <= 2; ++n) {
        auto g = Grid::cube(n, n == 1 ? 9 : 7, n == 1 ? -1.0 : -1.5, n == 1 ? 1.0 : 1.5);
        const NablaTable table(n);
        for (int trial = 0; trial < 3; ++trial) {
            PolyField u = dyadic_quadratic(n, rng);
            auto b = fd_baston_coeffs(GridField::from_poly(g, u));
            double worst = 0.0;
            for (std::size_t p = 0; p < b.pairs.size(); ++p) {
                const auto exact =
                    to_complex(baston_coefficient(table, b.pairs[p][0], b.pairs[p][1], u).constant_term());
                for (std::size_t k = 0; k < g->interior_nodes().size(); ++k) {
                    const auto v = b.at(k, static_cast<int>(p));
                    worst = std::max({worst, ulps_apart(v.real(), exact.real()), ulps_apart(v.imag(), exact.imag())});
                }
            }
            EXPECT_LE(worst, 8.0) << "n=" << n;
        }
    }
}

TEST(FdBaston, Antisymmetric) {
    auto g = Grid::cube(2, 5, -1, 1);
    RandomPoly gen(3);
    auto b = fd_baston_coeffs(GridField::from_poly(g, gen.psh_quadratic(2)));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_EQ(b.at(0, i, j), -b.at(0, j, i));
}

TEST(FdBaston, SecondOrderConvergence) {
    // degree-4 input: u = x0^4 + x1^2 x2^2 - x3^3 x0
    auto u_of = [](std::span<const double> x) {
        return std::pow(x[0], 4) + x[1] * x[1] * x[2] * x[2] - std::pow(x[3], 3) * x[0];
    };
    PolyField p(1);
    auto X = [](int m) { return PolyField::variable(1, m); };
    p = X(0) * X(0) * X(0) * X(0) + X(1) * X(1) * X(2) * X(2) - X(3) * X(3) * X(3) * X(0);
    const NablaTable table(1);
    const PolyField exact = baston_coefficient(table, 0, 1, p);
    std::vector<double> hs, errs;
    for (int m : {9, 17, 33}) {
        auto g = Grid::cube(1, m, -1, 1);
        auto b = fd_baston_coeffs(GridField::sample(g, u_of));
        double err = 0.0;
        const auto& nodes = g->interior_nodes();
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto x = g->coords(nodes[k]);
            err = std::max(err, std::abs(b.at(k, 0) - exact.evaluate(std::span<const double>(x))));
        }
        hs.push_back(std::log(g->h(0)));
        errs.push_back(std::log(err));
    }
    // least-squares slope of log err against log h
    const double mh = (hs[0] + hs[1] + hs[2]) / 3, me = (errs[0] + errs[1] + errs[2]) / 3;
    double num = 0, den = 0;
    for (int k = 0; k < 3; ++k) {
        num += (hs[k] - mh) * (errs[k] - me);
        den += (hs[k] - mh) * (hs[k] - mh);
    }
    EXPECT_GE(num / den, 1.8);
}

TEST(MaDensity, NormSquaredN1IsEight) {
    auto g = Grid::cube(1, 9, -1, 1);
    auto u = GridField::sample(g, [](std::span<const double> x) { return norm2(x); });
    auto mu = ma_density(u);
    for (std::uint32_t i : g->interior_nodes()) EXPECT_NEAR(mu.density[i], 8.0, 1e-12);
    for (std::size_t i = 0; i < g->size(); ++i)
        if (!g->interior(i)) {
            EXPECT_EQ(mu.density[i], 0.0);
        }
    EXPECT_FALSE(mu.non_psh);
}

TEST(MaDensity, ConstantIsZero) {
    auto g = Grid::cube(2, 5, -1, 1);
    GridField c(g, 2.5);
    GridField q = GridField::sample(g, [](std::span<const double> x) { return norm2(x); });
    auto mu = ma_density({&c, &q});
    EXPECT_EQ(mu.total_mass(), 0.0);
}

TEST(MaDensity, N2MatchesSymbolicOnSevenToTheEight) {
    auto g = Grid::cube(2, 7, -1, 1);
    RandomPoly gen(5);
    const PolyField u = gen.psh_quadratic(2);
    const PolyField v = gen.psh_quadratic(2);
    const double exact_uu = top_coefficient(ma_product(2, std::vector<PolyField>{u, u})).constant_term().re.get_d();
    const double exact_uv = top_coefficient(ma_product(2, std::vector<PolyField>{u, v})).constant_term().re.get_d();
    auto gu = GridField::from_poly(g, u);
    auto gv = GridField::from_poly(g, v);
    auto puu = ma_density(gu);
    auto puv = ma_density({&gu, &gv});
    auto pvu = ma_density({&gv, &gu});
    double worst = 0.0, asym = 0.0;
    for (std::uint32_t i : g->interior_nodes()) {
        worst = std::max(worst, std::abs(puu.density[i] - exact_uu) / exact_uu);
        worst = std::max(worst, std::abs(puv.density[i] - exact_uv) / exact_uv);
        asym = std::max(asym, std::abs(puv.density[i] - pvu.density[i]));
    }
    EXPECT_LT(worst, 1e-11);
    EXPECT_LE(asym, 1e-9 * exact_uv);
}

TEST(MaDensity, NonPshFlagged) {
    auto g = Grid::cube(1, 9, -1, 1);
    auto u = GridField::sample(g, [](std::span<const double> x) { return -norm2(x); });
    auto mu = ma_density(u);
    EXPECT_TRUE(mu.non_psh);
    EXPECT_EQ(mu.total_mass(), 0.0);
    EXPECT_LT(mu.worst_negative, -7.9);
}

TEST(Integrate, LinearMonotoneAndMass) {
    auto g = Grid::cube(1, 9, -1, 1);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unif(0, 1);
    std::vector<double> d(g->size()), f1(g->size()), f2(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) {
        d[i] = unif(rng);
        f1[i] = unif(rng);
        f2[i] = unif(rng) - 0.5;
    }
    MeasureDensity mu(g, d);
    std::vector<double> ones(g->size(), 1.0), zeros(g->size(), 0.0), combo(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) combo[i] = 2 * f1[i] - 3 * f2[i];
    EXPECT_DOUBLE_EQ(integrate(ones, mu), mu.total_mass());
    EXPECT_EQ(integrate(zeros, mu), 0.0);
    EXPECT_GE(integrate(f1, mu), 0.0);
    EXPECT_NEAR(integrate(combo, mu), 2 * integrate(f1, mu) - 3 * integrate(f2, mu), 1e-12);
    EXPECT_THROW(integrate(std::vector<double>(3, 0.0), mu), DomainError);
    EXPECT_THROW(MeasureDensity(g, std::vector<double>(g->size(), -1.0)), DomainError);
}

TEST(Integrate, EnergyOfShiftedNormSquaredExtrapolates) {
    // u = |q|^2 - 1 on [-1/2, 1/2]^4: density 8, int (1 - |q|^2) 8 dV = 16/3
    std::vector<double> vals;
    for (int m : {17, 33}) {
        auto g = Grid::cube(1, m, -0.5, 0.5);
        auto u = GridField::sample(g, [](std::span<const double> x) { return norm2(x) - 1.0; });
        auto mu = ma_density(u);
        vals.push_back(integrate(-u, mu));
    }
    const double extrapolated = 2 * vals[1] - vals[0];
    EXPECT_NEAR(extrapolated, 16.0 / 3.0, 0.02 * 16.0 / 3.0);
}

TEST(Mollify, ConstantConvexAndLimit) {
    auto g = Grid::cube(1, 17, -1, 1);
    GridField c(g, 1.75);
    auto mc = mollify(c, 3 * g->h(0));
    for (std::size_t i = 0; i < g->size(); ++i) EXPECT_NEAR(mc[i], 1.75, 1e-14);
    EXPECT_THROW(mollify(c, 0.5 * g->h(0)), DomainError);

    RandomPoly gen(9);
    auto q = GridField::from_poly(g, gen.psh_quadratic(1));
    auto mq = mollify(q, 2 * g->h(0));
    for (std::uint32_t i : g->interior_nodes()) EXPECT_GE(mq[i], q[i] - 1e-12);

    // eps = h: deviation shrinks like h^2
    std::vector<double> errs;
    for (int m : {9, 17, 33}) {
        auto gm = Grid::cube(1, m, -1, 1);
        auto f = GridField::sample(gm, [](std::span<const double> x) { return std::sin(x[0]) * std::cos(2 * x[1]) + x[2] * x[3]; });
        errs.push_back(sup_distance(mollify(f, gm->h(0)), f));
    }
    EXPECT_GT(errs[0] / errs[1], 3.0);
    EXPECT_GT(errs[1] / errs[2], 3.0);
}

namespace {

GridField bump(GridPtr g) {
    return GridField::sample(g, [](std::span<const double> x) {
        double p = 1.0;
        for (double v : x) p *= (1 - v * v);
        return p;
    });
}

} // namespace

TEST(Stokes, ZeroFunctionAndRefinement) {
    std::vector<StokesTerm> t{{MultiIndex{0}, [](std::span<const double> x) {
                                   return std::complex<double>(x[0] * x[1] + x[0] + x[2], x[3] * x[3] - 2 * x[1]);
                               }}};
    auto g0 = Grid::cube(1, 9, -1, 1);
    EXPECT_EQ(stokes_residual(0, t, GridField(g0)).residual, 0.0);
    EXPECT_THROW(stokes_residual(0, t, GridField(g0, 1.0)), DomainError);
    std::vector<double> res;
    for (int m : {9, 17, 33}) {
        auto g = Grid::cube(1, m, -1, 1);
        res.push_back(stokes_residual(1, t, bump(g)).residual);
    }
    // residual = h (c0 + c1 h + ...): res/h converges, with increments shrinking like h
    std::vector<double> scaled;
    for (int k = 0; k < 3; ++k) scaled.push_back(res[static_cast<std::size_t>(k)] / (2.0 / (8 << k)));
    EXPECT_LT(res[2], res[1]);
    EXPECT_LT(res[1], res[0]);
    const double d1 = std::abs(scaled[1] - scaled[0]), d2 = std::abs(scaled[2] - scaled[1]);
    EXPECT_LT(d2, 0.6 * d1);
    const double limit = 2 * scaled[2] - scaled[1];
    EXPECT_LT(std::abs(scaled[2] - limit), 0.15 * limit);
}

TEST(Stokes, ConstantFormMatchesTelescopedSum) {
    // T = c w^1 (n=1): d_alpha T = 0, so the residual is |int d_alpha h ^ T|,
    // whose centered-difference sum telescopes onto the nodes next to the box faces.
    const std::complex<double> c(0.5, -1.25);
    std::vector<StokesTerm> t{{MultiIndex{1}, [c](std::span<const double>) { return c; }}};
    auto g = Grid::cube(1, 9, -1, 1);
    auto h = bump(g);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] *= 1.0 + 0.3 * g->coord(i, 0) + 0.1 * g->coord(i, 2);
    const int alpha = 0;
    // w^0 ^ w^1 = +Omega: only k = 0 contributes, nabla_{00} = d0 + i d1
    std::complex<double> oracle = 0.0;
    const int m = g->m();
    for (int axis : {0, 1}) {
        const std::complex<double> w = axis == 0 ? 1.0 : std::complex<double>(0, 1);
        for (std::uint32_t i : g->interior_nodes()) {
            const int k = g->axis_index(i, axis);
            if (k == 1) oracle -= w * h[i];
            if (k == m - 2) oracle += w * h[i];
        }
    }
    oracle *= c * g->cell_volume() / (2.0 * g->h(0));
    auto r = stokes_residual(alpha, t, h);
    EXPECT_EQ(r.h_dT, 0.0);
    EXPECT_NEAR(r.residual, std::abs(oracle), 1e-12);
}

TEST(FieldIo, RoundTripAndSlice) {
    auto g = Grid::cube(1, 5, -1, 1, Region::ball({0, 0, 0, 0}, 0.9));
    auto f = GridField::sample(g, [](std::span<const double> x) { return x[0] - 2 * x[3]; });
    const auto dir = std::filesystem::temp_directory_path() / "qma_io_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "f.bin").string();
    write_field(path, f, {{"name", "test"}});
    GridField back = read_field(path);
    EXPECT_TRUE(back.grid().same_as(*g));
    EXPECT_EQ(back.values(), f.values());
    write_csv_slice((dir / "s.csv").string(), f, 0, 3);
    std::ifstream in(dir / "s.csv");
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    EXPECT_EQ(lines, 1 + 25);
    std::filesystem::remove_all(dir);
}
