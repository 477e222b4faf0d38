#include "qma/energy.hpp"
#include "qma/generators.hpp"
#include "qma/identities.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace qma;

namespace {

PolyField norm_squared(int n) {
    PolyField u(n);
    for (int a = 0; a < 4 * n; ++a) u += PolyField::variable(n, a) * PolyField::variable(n, a);
    return u;
}

std::vector<const GridField*> ptrs(std::initializer_list<const GridField*> l) { return l; }

// -prod cos(pi x_a / 2): smooth, zero on the boundary of [-1, 1]^{4n}
GridField cosine_bump(const GridPtr& g) {
    return GridField::sample(g, [](std::span<const double> x) {
        double p = -1.0;
        for (double c : x) p *= std::cos(std::numbers::pi * c / 2.0);
        return p;
    });
}

} // namespace

TEST(Gamma, SymbolicNormSquaredAndSymmetry) {
    const PolyField u = norm_squared(1);
    const PolyForm g = gamma_form(1, u, u);
    const PolyField c = g.coeff(MultiIndex::from_bits(0b11));
    EXPECT_EQ(c, PolyField::constant(1, ComplexRational(Rational(4))) * u);
    RandomPoly gen(21);
    for (int n : {1, 2})
        for (int t = 0; t < 5; ++t) {
            const PolyField a = gen.real_poly(n, 3, 4), b = gen.real_poly(n, 3, 4);
            EXPECT_EQ(gamma_form(n, a, b), gamma_form(n, b, a));
        }
}

TEST(Gamma, GridMatchesSymbolicOnQuadratics) {
    RandomPoly gen(22);
    {
        auto g = Grid::cube(1, 9, -1, 1);
        const PolyField u = gen.psh_quadratic(1), v = gen.psh_quadratic(1);
        const PolyField c = gamma_form(1, u, v).coeff(MultiIndex::from_bits(0b11));
        const auto dens = gamma_density(GridField::from_poly(g, u), GridField::from_poly(g, v));
        for (std::uint32_t i : g->interior_nodes()) {
            const double exact = c.evaluate(std::span<const double>(g->coords(i))).real();
            EXPECT_NEAR(dens[i], exact, 1e-10 * std::max(1.0, std::abs(exact)));
        }
    }
    {
        auto g = Grid::cube(2, 5, -1, 1);
        const PolyField u = gen.psh_quadratic(2), v = gen.psh_quadratic(2), w = gen.psh_quadratic(2);
        const PolyField c = top_coefficient(wedge(gamma_form(2, u, v), baston(2, w)));
        const auto gu = GridField::from_poly(g, u), gv = GridField::from_poly(g, v), gw = GridField::from_poly(g, w);
        const auto dens = gamma_density(gu, gv, ptrs({&gw}));
        const auto& nodes = g->interior_nodes();
        for (std::size_t k = 0; k < nodes.size(); k += 97) {
            const double exact = c.evaluate(std::span<const double>(g->coords(nodes[k]))).real();
            EXPECT_NEAR(dens[nodes[k]], exact, 1e-9 * std::max(1.0, std::abs(exact)));
        }
    }
}

TEST(Gamma, UnitGradient) {
    auto g = Grid::cube(1, 5, -1, 1);
    const auto x0 = GridField::sample(g, [](std::span<const double> x) { return x[0]; });
    const auto dens = gamma_density(x0, x0);
    for (std::uint32_t i : g->interior_nodes()) EXPECT_NEAR(dens[i], 1.0, 1e-14);
}

TEST(Gamma, IntegrationByPartsUnderRefinement) {
    // first order: boundary nodes carry no quadrature weight
    double previous = 1.0;
    for (int m : {9, 17}) {
        auto g = Grid::cube(1, m, -1, 1);
        const auto u = cosine_bump(g);
        const double lhs = integrate(u, ma_density(u));
        const double rhs = -gamma_integral(u, u);
        const double rel = std::abs(lhs - rhs) / std::abs(rhs);
        EXPECT_LT(rel, previous);
        previous = rel;
    }
    EXPECT_LT(previous, 0.2);
}

TEST(Energy, HomogeneityAndValidation) {
    auto g = Grid::cube(1, 9, -1, 1);
    const auto u = cosine_bump(g);
    for (double p : {1.0, 2.0, 3.5}) {
        const double e = energy_p(u, p).value;
        EXPECT_GT(e, 0.0);
        EXPECT_NEAR(energy_p(2.0 * u, p).value, std::pow(2.0, p + 1) * e, 1e-10 * e);
        const auto w = detail::repeat(u);
        EXPECT_NEAR(energy_p(u, p, w).value, e, 1e-12 * e);
    }
    EXPECT_THROW(energy_p(u + 1.0, 1.0), DomainError);
    EXPECT_THROW(energy_p(u, 0.5), DomainError);
}

TEST(Energy, FunctionalF) {
    auto g = Grid::cube(1, 9, -1, 1);
    const auto u = cosine_bump(g);
    const auto mu = MeasureDensity::constant(g, 2.0);
    const double e = energy(u);
    EXPECT_NEAR(functional_F(u, MeasureDensity::zero(g)), e / 2.0, 1e-12 * e);
    EXPECT_NEAR(functional_F(u, mu), e / 2.0 + integrate(u, mu), 1e-12 * e);
}

TEST(Constants, DpParsesAndHolderConstant) {
    EXPECT_DOUBLE_EQ(alpha_np(1, 2.0), 1.0);
    EXPECT_DOUBLE_EQ(alpha_np(2, 2.0), 3.0);
    EXPECT_DOUBLE_EQ(D_p(1, 2.0, DpParse::Grouped), 4.0);
    EXPECT_DOUBLE_EQ(D_p(2, 2.0, DpParse::Grouped), 64.0);
    EXPECT_DOUBLE_EQ(D_p(1, 2.0, DpParse::Literal), 1.0);
    EXPECT_DOUBLE_EQ(D_p(2, 2.0, DpParse::Literal), 4.0);
    for (int n : {1, 2}) {
        EXPECT_EQ(D_p(n, 1.0, DpParse::Grouped), 1.0);
        EXPECT_EQ(D_p(n, 1.0, DpParse::Literal), 1.0);
    }
    EXPECT_EQ(C_p(1.0), 1.0);
    EXPECT_DOUBLE_EQ(C_p(2.0), 4.0);
}

TEST(Margin, SignsAndTolerance) {
    const auto ok = make_margin("x", 1.0, 2.0, 0.1, {});
    EXPECT_TRUE(ok.passed);
    EXPECT_DOUBLE_EQ(ok.margin, 1.0);
    const auto bad = make_margin("x", 2.0, 1.0, 0.1, {});
    EXPECT_FALSE(bad.passed);
    const auto within = make_margin("x", 1.0 + 1e-5, 1.0, 0.1, {});
    EXPECT_TRUE(within.passed);  // tol = (1e-9 + 1e-3 * 0.1) * scale
    EXPECT_FALSE(make_margin("x", 1.0 + 1e-5, 1.0, 0.1, TolerancePolicy::tight()).passed);
    EXPECT_EQ(ok.to_json()["name"], "x");
}

TEST(Suites, RandomZeroTracePshN1) {
    auto g = Grid::cube(1, 9, -1, 1);
    Rng rng(31);
    for (int t = 0; t < 6; ++t) {
        const auto u = random_zero_trace_psh(g, rng), v = random_zero_trace_psh(g, rng);
        const auto vs = ptrs({&v});
        EXPECT_TRUE(check_cauchy_schwarz(u, v).passed);
        EXPECT_TRUE(check_mass_holder(vs).passed);
        for (double p : {1.0, 2.0}) {
            EXPECT_TRUE(check_energy_estimate(u, vs, p).passed);
            EXPECT_TRUE(all_passed(check_holder_step(u, v, {}, p)));
        }
        EXPECT_TRUE(all_passed(check_comparison(u, v)));
        EXPECT_TRUE(check_mass_monotonicity(u + v, u).passed);
        EXPECT_TRUE(check_energy_monotonicity(u + v, u).passed);
        EXPECT_TRUE(check_energy_convexity(u, v).passed);
        EXPECT_TRUE(all_passed(check_blocki(u + v, u, vs)));
        EXPECT_TRUE(check_integration_by_parts(u, v).passed);
        const auto loc = check_locality(u, v);
        EXPECT_TRUE(loc.passed);
        EXPECT_EQ(loc.lhs, 0.0);
    }
}

TEST(Suites, RandomZeroTracePshN2) {
    auto g = Grid::cube(2, 5, -1, 1);
    Rng rng(32);
    const auto u = random_zero_trace_psh(g, rng), v = random_zero_trace_psh(g, rng), w = random_zero_trace_psh(g, rng);
    const auto T = ptrs({&w});
    const auto vs = ptrs({&v, &w});
    EXPECT_TRUE(check_cauchy_schwarz(u, v, T).passed);
    EXPECT_TRUE(check_mass_holder(vs).passed);
    EXPECT_TRUE(check_energy_estimate(u, vs, 2.0).passed);
    EXPECT_TRUE(check_holder_step(u, v, T, 2.0)[0].passed);
    EXPECT_TRUE(all_passed(check_comparison(u, v)));
    EXPECT_TRUE(all_passed(check_blocki(u + v, u, vs)));
}

TEST(Suites, DemaillyOnQuadratics) {
    Rng rng(33);
    auto g = Grid::cube(1, 13, -1, 1);
    double tested = 0.0;
    for (int t = 0; t < 5; ++t) {
        const auto a = random_psh_quadratic(1, rng).sample(g), b = random_psh_quadratic(1, rng).sample(g);
        const auto r = check_demailly(a, b);
        EXPECT_TRUE(all_passed(r));
        tested += r[0].extra.at("tested_nodes");
    }
    EXPECT_GT(tested, 0.0);
}

TEST(Suites, ComparisonRejectsWrongTraceOrder) {
    auto g = Grid::cube(1, 7, -1, 1);
    const auto u = cosine_bump(g);
    EXPECT_THROW(check_comparison(u, u + 0.5), DomainError);
    EXPECT_THROW(check_blocki(u, u + 0.5, ptrs({&u})), DomainError);
}

TEST(Capacity, EmptyAndBall) {
    auto g = Grid::cube(1, 13, -1, 1);
    Rng rng(34);
    const auto phi = random_zero_trace_psh(g, rng);
    const auto empty = capacity_estimate(std::nullopt, phi, 2.0);
    EXPECT_TRUE(empty.passed);
    EXPECT_EQ(empty.lhs, 0.0);
    const auto none = capacity_estimate(Region::ball({0.05, 0, 0, 0}, 0.01), phi, 2.0);
    EXPECT_EQ(none.extra.at("capacity"), 0.0);
    for (double p : {1.0, 2.0}) {
        const auto m = capacity_estimate(Region::ball({0, 0, 0, 0}, 0.4), phi, p);
        EXPECT_TRUE(m.passed) << p;
        EXPECT_GT(m.extra.at("capacity"), 0.0);
    }
}

TEST(Diagnostics, ClassProxies) {
    auto g = Grid::cube(1, 9, -1, 1);
    const auto u = cosine_bump(g);
    const std::vector<double> ps{1.0, 2.0};
    const auto d = class_diagnostics(u, ps);
    EXPECT_TRUE(d.psh.is_psh);
    EXPECT_LT(d.trace_sup, 1e-15);
    EXPECT_NEAR(d.energies.at(1.0), energy(u), 1e-12 * energy(u));
    EXPECT_GT(d.total_mass, 0.0);
    EXPECT_TRUE(d.to_json().contains("energies"));
}
