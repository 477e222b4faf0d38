#include "qma/generators.hpp"
#include "qma/psh.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace qma;

namespace {

double radius(const Grid& g, std::size_t i) {
    double s = 0.0;
    for (double c : g.coords(i)) s += c * c;
    return std::sqrt(s);
}

// Least eigenvalue of the 2n x 2n complex embedding [[Z, W], [-conj W, conj Z]] of H = Z + W j.
double embedded_least_eigenvalue(int n, std::span<const double> hess) {
    const auto H = quaternionic_hessian(n, hess);
    Eigen::MatrixXcd M(2 * n, 2 * n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const auto& q = H[static_cast<std::size_t>(j * n + k)];
            const std::complex<double> z(q[0], q[1]), w(q[2], q[3]);
            M(j, k) = z;
            M(j, n + k) = w;
            M(n + j, k) = -std::conj(w);
            M(n + j, n + k) = std::conj(z);
        }
    EXPECT_LT((M - M.adjoint()).norm(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
    return es.eigenvalues().minCoeff();
}

std::vector<double> random_symmetric(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> N;
    std::vector<double> S(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) S[static_cast<std::size_t>(i * d + j)] = S[static_cast<std::size_t>(j * d + i)] = N(rng);
    return S;
}

double quadratic_form(std::span<const double> S, std::span<const int> v) {
    const std::size_t d = v.size();
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) s += v[i] * S[i * d + j] * v[j];
    return s;
}

} // namespace

TEST(QuaternionicHessian, LeastEigenvalueMatchesComplexEmbedding) {
    std::mt19937_64 rng(11);
    for (int n : {1, 2})
        for (int t = 0; t < 200; ++t) {
            const auto S = random_symmetric(4 * n, rng);
            EXPECT_NEAR(least_quaternionic_eigenvalue(n, S), embedded_least_eigenvalue(n, S), 1e-10);
        }
}

TEST(QuaternionicHessian, ScalarCaseIsTheLaplacian) {
    std::mt19937_64 rng(12);
    const auto S = random_symmetric(4, rng);
    const auto H = quaternionic_hessian(1, S);
    EXPECT_NEAR(H[0][0], S[0] + S[5] + S[10] + S[15], 1e-14);
    for (std::size_t c = 1; c < 4; ++c) EXPECT_NEAR(H[0][c], 0.0, 1e-14);
}

// Subharmonicity along right lines {x + xi t}: the Laplacian of a quadratic
// on the line through (p, q) is sum_a v_a^T S v_a and is bounded below by
// lambda_min |xi|^2, with equality-type matches on the coordinate lines.
TEST(QuaternionicHessian, RightLineLaplaciansBoundedByLeastEigenvalue) {
    std::mt19937_64 rng(13);
    const auto lines = detail::right_line_vectors();
    ASSERT_EQ(lines.size(), 82u);
    for (int t = 0; t < 50; ++t) {
        const auto S = random_symmetric(8, rng);
        const double lam = least_quaternionic_eigenvalue(2, S);
        const auto H = quaternionic_hessian(2, S);
        for (const auto& line : lines) {
            double lap = 0.0, norm = 0.0;
            for (const auto& v : line) lap += quadratic_form(S, v);
            for (int x : line[0]) norm += x * x;
            EXPECT_GE(lap / norm, lam - 1e-10);
        }
        EXPECT_NEAR(quadratic_form(S, lines[40][0]) + quadratic_form(S, lines[40][1]) + quadratic_form(S, lines[40][2]) +
                        quadratic_form(S, lines[40][3]),
                    H[0][0], 1e-12);  // q = 0: the line (1, 0)
        double lap01 = 0.0;
        for (const auto& v : lines.back()) lap01 += quadratic_form(S, v);
        EXPECT_NEAR(lap01, H[3][0], 1e-12);
    }
}

TEST(PshTest, ConvexAndConcave) {
    for (int n : {1, 2}) {
        auto g = Grid::cube(n, n == 1 ? 9 : 5, -1.0, 1.0);
        const auto plus = GridField::sample(g, [](std::span<const double> x) {
            double s = 0.0;
            for (double c : x) s += c * c;
            return s;
        });
        const auto r = psh_test(plus);
        EXPECT_TRUE(r.is_psh);
        EXPECT_EQ(r.worst_violation, 0.0);
        EXPECT_NEAR(r.least_eigenvalue, 8.0, 1e-9);
        const auto r2 = psh_test(-plus);
        EXPECT_FALSE(r2.is_psh);
        EXPECT_NEAR(r2.worst_violation, -8.0, 1e-9);
        EXPECT_EQ(r2.violating_node.size(), static_cast<std::size_t>(4 * n));
    }
}

TEST(PshTest, MaxOfConvexQuadratics) {
    std::mt19937_64 rng(14);
    auto g = Grid::cube(1, 17, -1.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        const auto a = random_psh_quadratic(1, rng, 0.5).sample(g);
        const auto b = random_psh_quadratic(1, rng, 0.5).sample(g);
        EXPECT_TRUE(psh_test(pointwise_max(a, b)).is_psh) << "trial " << t;
    }
}

TEST(PshTest, IgnoresNodesWhoseStencilLeavesTheDomain) {
    auto g = Grid::cube(1, 9, -1.0, 1.0, Region::ball({0, 0, 0, 0}, 0.9));
    GridField u(g, 0.0);
    for (std::uint32_t i : g->interior_nodes()) u[i] = radius(*g, i) * radius(*g, i) - 0.81;
    EXPECT_TRUE(psh_test(u).is_psh);
    std::size_t core = 0;
    for (std::uint32_t i : g->interior_nodes()) core += g->core(i) ? 1 : 0;
    EXPECT_EQ(psh_test(u).tested_nodes, core);
    EXPECT_LT(core, g->interior_nodes().size());
}

TEST(Extremal, WholeInteriorIsMinusOne) {
    auto g = Grid::cube(1, 9, -1.0, 1.0);
    const double h = g->h(0);
    const auto r = extremal_function(g, Region::box(std::vector<double>(4, -1.0 + h / 2), std::vector<double>(4, 1.0 - h / 2)));
    for (std::size_t i = 0; i < g->size(); ++i) EXPECT_EQ(r.u[i], g->interior(i) ? -1.0 : 0.0);
}

TEST(Extremal, RejectsBadK) {
    auto g = Grid::cube(1, 9, -1.0, 1.0);
    EXPECT_THROW(extremal_function(g, Region::ball({1, 0, 0, 0}, 0.3)), DomainError);
    EXPECT_THROW(extremal_function(g, Region::ball({0.1, 0.1, 0.1, 0.1}, 0.01)), DomainError);
}

TEST(Extremal, BallAnnulusClosedForm) {
    double previous = 1.0;
    for (int m : {17, 33}) {
        auto g = Grid::cube(1, m, -1.0, 1.0, Region::ball({0, 0, 0, 0}, 1.0));
        const auto r = extremal_function(g, Region::ball({0, 0, 0, 0}, 0.5));
        double err = 0.0;
        for (std::uint32_t i : g->interior_nodes())
            err = std::max(err, std::abs(r.u[i] - ball_annulus_extremal(radius(*g, i), 0.5, 1.0)));
        EXPECT_LE(err, 5e-2) << "m=" << m;
        EXPECT_LT(err, previous);
        previous = err;
        EXPECT_GE(r.u.min_value(), -1.0);
        EXPECT_LE(r.u.max_value(), 0.0);
        EXPECT_TRUE(psh_test(r.u).is_psh);
    }
    EXPECT_NEAR(ball_annulus_extremal(0.75, 0.5, 1.0), -0.259259259259, 1e-12);
}

TEST(Extremal, MonotoneInK) {
    for (int n : {1, 2}) {
        auto g = n == 1 ? Grid::cube(1, 17, -1.0, 1.0) : Grid::cube(2, 7, -1.0, 1.0);
        const std::vector<double> c(static_cast<std::size_t>(4 * n), 0.0);
        const auto small = extremal_function(g, Region::ball(c, 0.35)).u;
        const auto large = extremal_function(g, Region::ball(c, 0.6)).u;
        for (std::size_t i = 0; i < g->size(); ++i) EXPECT_GE(small[i], large[i] - 1e-7);
        EXPECT_TRUE(psh_test(small).is_psh);
        EXPECT_TRUE(psh_test(large).is_psh);
    }
}

TEST(ProjectP, FixesAdmissiblePshFunctions) {
    std::mt19937_64 rng(15);
    for (int n : {1, 2}) {
        auto g = n == 1 ? Grid::cube(1, 13, -1.0, 1.0) : Grid::cube(2, 5, -1.0, 1.0);
        const auto q = random_psh_quadratic(n, rng).sample(g);
        const auto u = q + (-q.max_value() - 0.1);
        EXPECT_LE(sup_distance(project_P(u), u), 1e-12);
    }
}

TEST(ProjectP, MinorantIdempotentMonotone) {
    std::mt19937_64 rng(16);
    for (int n : {1, 2}) {
        auto g = n == 1 ? Grid::cube(1, 13, -1.0, 1.0) : Grid::cube(2, 5, -1.0, 1.0);
        for (int t = 0; t < 3; ++t) {
            const auto u = random_continuous_obstacle(g, rng);
            const auto pu = project_P(u);
            for (std::size_t i = 0; i < g->size(); ++i) {
                EXPECT_LE(pu[i], u[i] + 1e-15);
                if (!g->interior(i)) {
                    EXPECT_EQ(pu[i], std::min(u[i], 0.0));
                }
            }
            EXPECT_TRUE(psh_test(pu).is_psh);
            EXPECT_LE(sup_distance(project_P(pu), pu), 1e-6);
            const auto v = u + 0.05;
            const auto pv = project_P(v);
            for (std::size_t i = 0; i < g->size(); ++i) EXPECT_LE(pu[i], pv[i] + 1e-6);
        }
    }
}

TEST(ProjectP, ReportsNonConvergence) {
    auto g = Grid::cube(1, 17, -1.0, 1.0);
    std::mt19937_64 rng(17);
    EnvelopeOptions opt;
    opt.max_sweeps = 2;
    try {
        project_P(random_continuous_obstacle(g, rng), opt);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.iterations(), 2);
        EXPECT_GT(e.residual(), opt.tol);
    }
}

TEST(Exhaustion, NegativeZeroTracePsh) {
    auto g = Grid::cube(1, 17, -1.0, 1.0, Region::ball({0, 0, 0, 0}, 0.9));
    const auto rho = exhaustion_function(g);
    EXPECT_TRUE(psh_test(rho).is_psh);
    for (std::size_t i = 0; i < g->size(); ++i) {
        if (g->interior(i))
            EXPECT_LT(rho[i], 0.0);
        else
            EXPECT_EQ(rho[i], 0.0);
    }
    const auto d = distance_to_boundary(g);
    EXPECT_NEAR(d[g->center()], 0.9, 1e-12);
}

TEST(ObstacleSpec, ValidationAndJson) {
    auto g = Grid::cube(1, 9, -1.0, 1.0);
    EXPECT_THROW(ObstacleSpec(GridField(g, 0.0), GridField(g, 1.0)), DomainError);
    const auto s = ObstacleSpec::load(GridField(g, 0.0), nlohmann::json{{"type", "ball"}, {"radius", 0.3}});
    EXPECT_TRUE(s.in_K(g->center()));
    EXPECT_FALSE(s.in_K(0));
}
