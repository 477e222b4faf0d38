#include "qma/solver.hpp"
#include "qma/suites.hpp"

#include <gtest/gtest.h>

using namespace qma;

namespace {

SolveConfig direct() {
    SolveConfig c;
    c.method = SolveMethod::DirectN1;
    return c;
}

} // namespace

TEST(Laplacian, InverseNormIsTorsionSup) {
    // torsion function of [-1,1]^4 is below the slab bound (1 - x_0^2) / 2
    auto g = Grid::cube(1, 9, -1, 1);
    const double k = inverse_laplacian_norm(g);
    EXPECT_GT(k, 0.0);
    EXPECT_LT(k, 0.5);
}

TEST(Direct, ZeroMeasureZeroTrace) {
    auto g = Grid::cube(1, 7, -1, 1);
    const auto r = solve(MeasureDensity::zero(g), direct());
    EXPECT_EQ(r.phi.sup_norm(), 0.0);
    EXPECT_TRUE(r.converged);
}

TEST(Direct, ManufacturedNormSquared) {
    auto g = Grid::cube(1, 9, -0.5, 0.5);
    const Problem P = manufactured_problem(norm_squared_field(g, 1.0));
    const auto r = solve(P.mu, direct(), &P.trace);
    EXPECT_LT(sup_distance(r.phi, *P.exact), 1e-10);
    EXPECT_TRUE(r.psh.is_psh);
}

TEST(Direct, LinearInMeasureWithZeroTrace) {
    auto g = Grid::cube(1, 9, -1, 1);
    const Problem P = ball_problem(g, {0.1, 0, 0, -0.2}, 0.6, 3.0);
    const auto a = solve(P.mu, direct());
    const auto b = solve(P.mu.scaled(2.0), direct());
    EXPECT_LT(sup_distance(b.phi, 2.0 * a.phi), 1e-9 * b.phi.sup_norm());
}

TEST(Direct, RejectsQuaternionicDimensionTwo) {
    auto g = Grid::cube(2, 5, -1, 1);
    EXPECT_THROW(solve(MeasureDensity::constant(g, 1.0), direct()), DomainError);
}

TEST(Variational, AgreesWithDirect) {
    auto g = Grid::cube(1, 9, -1, 1);
    const Problem P = ball_problem(g, {0, 0, 0, 0}, 0.7, 2.0);
    SolveConfig cfg;
    cfg.tol_residual = 1e-10;
    const auto v = solve(P.mu, cfg);
    const auto d = solve(P.mu, direct());
    EXPECT_TRUE(v.converged) << v.status;
    EXPECT_LT(sup_distance(v.phi, d.phi), 10.0 * inverse_laplacian_norm(g) * std::max(d.residual, v.residual));
}

TEST(Variational, ManufacturedN1WithTrace) {
    auto g = Grid::cube(1, 9, -0.5, 0.5);
    const Problem P = manufactured_problem(norm_squared_field(g, 1.0));
    SolveConfig cfg;
    cfg.tol_residual = 1e-10;
    const auto r = solve(P.mu, cfg, &P.trace);
    EXPECT_TRUE(r.converged) << r.status;
    EXPECT_LT(sup_distance(r.phi, *P.exact), 1e-8);
}

TEST(Variational, ManufacturedN2) {
    auto g = Grid::cube(2, 5, -1, 1);
    const Problem P = manufactured_problem(norm_squared_field(g, 1.0));
    SolveConfig cfg;
    cfg.tol_residual = 1e-9;
    const auto r = solve(P.mu, cfg, &P.trace);
    EXPECT_TRUE(r.converged) << r.status;
    EXPECT_LT(sup_distance(r.phi, *P.exact), 1e-7);
    EXPECT_TRUE(r.psh.is_psh);
    EXPECT_LE(r.energy_rise, 1e-8);
}

TEST(Variational, EnergyTraceDecreasesDuringLineSearch) {
    auto g = Grid::cube(1, 9, -1, 1);
    SolveConfig cfg;
    const auto r = solve(MeasureDensity::constant(g, 1.0), cfg);
    ASSERT_GE(r.energy_trace.size(), 2u);
    const std::size_t armijo = r.energy_trace.size() - static_cast<std::size_t>(r.polish_steps);
    for (std::size_t k = 1; k < armijo; ++k) EXPECT_LE(r.energy_trace[k], r.energy_trace[k - 1] + 1e-12);
}

TEST(Variational, ZeroMeasureReturnsMaximalExtension) {
    auto g = Grid::cube(1, 7, -1, 1);
    const auto trace = norm_squared_field(g, 0.0);
    const auto r = solve(MeasureDensity::zero(g), {}, &trace);
    EXPECT_EQ(r.status, "zero measure");
    EXPECT_LT(sup_distance(r.phi, maximal_extension(trace)), 1e-12);
}

TEST(Variational, ComparisonOfMeasures) {
    // mu_1 >= mu_2 with equal traces gives phi_1 <= phi_2
    auto g = Grid::cube(1, 9, -1, 1);
    const Problem small = ball_problem(g, {0, 0, 0, 0}, 0.5, 1.0);
    const auto big = MeasureDensity(g, [&] {
        auto d = small.mu.density;
        for (std::uint32_t i : g->interior_nodes()) d[i] += 0.5;
        return d;
    }());
    SolveConfig cfg;
    cfg.tol_residual = 1e-10;
    const auto a = solve(big, cfg), b = solve(small.mu, cfg);
    for (std::size_t i = 0; i < g->size(); ++i) EXPECT_LE(a.phi[i], b.phi[i] + 1e-9);
}

TEST(Variational, UniqueAcrossInitializations) {
    const auto s = run_uniqueness(1, 9, 2, 41);
    EXPECT_TRUE(s.passed()) << s.to_json().dump();
}

TEST(Subsolution, BoundsTheSolution) {
    auto g = Grid::cube(1, 9, -1, 1);
    const TestFunctions gen(g);
    Rng rng = trial_rng(42, 0);
    const auto psi = gen.zero_trace(rng);
    const auto full = ma_density(psi);
    for (double c : {1.0, 0.5, 0.0}) {
        const auto rep = check_subsolution_solve(psi, full.scaled(c));
        EXPECT_TRUE(rep.passed) << c << ' ' << rep.to_json().dump();
    }
    EXPECT_THROW(check_subsolution_solve(psi, full.scaled(2.0)), DomainError);
}

TEST(Derivative, OneSidedQuotientsConverge) {
    auto g = Grid::cube(1, 9, -1, 1);
    const TestFunctions gen(g);
    Rng rng = trial_rng(43, 0);
    const auto u = gen.zero_trace(rng), v = gen.zero_trace(rng);
    const auto rep = check_derivative_formula(u, v);
    EXPECT_GT(rep.formula, 0.0);
    for (const auto& s : rep.samples) {
        if (std::abs(s.t) == 1e-3) {
            EXPECT_LT(s.rel_error, s.t > 0 ? 0.01 : 0.05) << s.t;
        }
    }
}

TEST(Problems, FromJson) {
    auto g = Grid::cube(1, 7, -1, 1);
    EXPECT_DOUBLE_EQ(problem_from_json(g, {{"type", "constant"}, {"value", 2.0}}).mu.density[g->center()], 2.0);
    const auto b = problem_from_json(g, {{"type", "ball"}, {"radius", 0.2}, {"value", 3.0}});
    EXPECT_DOUBLE_EQ(b.mu.total_mass(), 3.0 * g->cell_volume());
    const auto m = problem_from_json(g, {{"type", "manufactured"}, {"shift", 2.0}});
    ASSERT_TRUE(m.exact.has_value());
    EXPECT_DOUBLE_EQ(m.trace[0], 4.0 - 2.0);
    EXPECT_THROW(problem_from_json(g, {{"type", "nope"}}), DomainError);
    EXPECT_THROW(problem_from_json(g, {{"type", "constant"}, {"value", -1.0}}), DomainError);
    EXPECT_THROW(problem_from_json(g, {{"type", "manufactured"}, {"field", "x"}}), DomainError);
}

TEST(Config, Validation) {
    SolveConfig c;
    c.armijo_shrink = 1.0;
    EXPECT_THROW(c.validate(), DomainError);
    EXPECT_EQ(solve_method_from_string("direct"), SolveMethod::DirectN1);
    EXPECT_THROW(solve_method_from_string("newton"), DomainError);
    auto g = Grid::cube(1, 7, -1, 1);
    std::vector<double> neg(g->size(), 0.0);
    neg[g->center()] = -1.0;
    EXPECT_THROW(MeasureDensity(g, neg), DomainError);
}
