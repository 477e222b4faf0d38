#pragma once

// Plurisubharmonicity test on grids and the obstacle envelope
// sup{v PSH : v <= obstacle, v <= k on K, trace(v) = boundary}, which yields
// relative extremal functions, the projection P and exhaustion functions.

#include "qma/error.hpp"
#include "qma/geometry.hpp"
#include "qma/grid.hpp"
#include "qma/parallel.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace qma {

struct PshReport {
    bool is_psh = true;
    double worst_violation = 0.0;   // min(0, least eigenvalue)
    double least_eigenvalue = 0.0;  // least quaternionic Hessian eigenvalue over tested nodes
    std::vector<double> violating_node;
    double tolerance = 0.0;
    std::size_t tested_nodes = 0;
    std::size_t violations = 0;

    nlohmann::json to_json() const {
        return {{"is_psh", is_psh},           {"worst_violation", worst_violation}, {"least_eigenvalue", least_eigenvalue},
                {"violating_node", violating_node},
                {"tolerance", tolerance},     {"tested_nodes", tested_nodes},       {"violations", violations}};
    }
};

namespace detail {

// e_a * conj(e_b) = sign * e_unit
struct UnitProduct {
    int unit;
    double sign;
};

inline const std::array<std::array<UnitProduct, 4>, 4>& unit_conj_table() {
    static const auto table = [] {
        // Hamilton products e_a e_b
        constexpr int u[4][4] = {{0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0}};
        constexpr double s[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {1, -1, -1, 1}, {1, 1, -1, -1}};
        std::array<std::array<UnitProduct, 4>, 4> t{};
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const double conj_sign = b == 0 ? 1.0 : -1.0;
                t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = {u[a][b], s[a][b] * conj_sign};
            }
        return t;
    }();
    return table;
}

// Right product q * e_a as a signed permutation of q's components.
inline std::array<int, 4> right_unit_multiply(const std::array<int, 4>& q, int a) {
    const auto& t = unit_conj_table();
    std::array<int, 4> out{};
    for (int c = 0; c < 4; ++c) {
        // e_c e_a = (e_c conj(e_a)) * (a == 0 ? 1 : -1)
        const auto& p = t[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)];
        const double sign = p.sign * (a == 0 ? 1.0 : -1.0);
        out[static_cast<std::size_t>(p.unit)] += static_cast<int>(sign) * q[static_cast<std::size_t>(c)];
    }
    return out;
}

} // namespace detail

/// Quaternionic Hessian H_jk = sum_{a,b} e_a conj(e_b) d_{4j+b} d_{4k+a} u from a
/// real Hessian (row-major, dimension 4n). Entries as quaternion components.
inline std::vector<std::array<double, 4>> quaternionic_hessian(int n, std::span<const double> hess) {
    const int d = 4 * n;
    const auto& t = detail::unit_conj_table();
    std::vector<std::array<double, 4>> H(static_cast<std::size_t>(n * n), std::array<double, 4>{});
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            auto& q = H[static_cast<std::size_t>(j * n + k)];
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    const auto& p = t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                    q[static_cast<std::size_t>(p.unit)] += p.sign * hess[static_cast<std::size_t>((4 * j + b) * d + 4 * k + a)];
                }
        }
    return H;
}

/// Least eigenvalue of the hyperhermitian Hessian (n = 1, 2).
inline double least_quaternionic_eigenvalue(int n, std::span<const double> hess) {
    const auto H = quaternionic_hessian(n, hess);
    if (n == 1) return H[0][0];
    const double a = H[0][0], b = H[3][0];
    const auto& q = H[1];
    const double q2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
    return 0.5 * ((a + b) - std::sqrt((a - b) * (a - b) + 4.0 * q2));
}

/// Default PSH tolerance: relative to the Hessian scale plus the noise that
/// an envelope solved to 1e-8 leaves in second differences.
inline double default_psh_tolerance(const Grid& g, double hessian_scale) {
    double hmin = g.h(0);
    for (int a = 1; a < g.dim(); ++a) hmin = std::min(hmin, g.h(a));
    return 1e-6 * std::max(1.0, hessian_scale) + 1e-6 / (hmin * hmin);
}

/// Node-wise PSD test of the FD quaternionic Hessian on core nodes (interior
/// nodes whose stencil stays in the closed domain). tol < 0 selects the default.
inline PshReport psh_test(const GridField& u, double tol = -1.0) {
    const Grid& g = u.grid();
    const auto d = static_cast<std::size_t>(g.dim());
    const auto& nodes = g.interior_nodes();
    std::vector<double> least(nodes.size(), std::numeric_limits<double>::infinity());
    std::vector<double> scale(nodes.size(), 0.0);
    parallel_chunks(nodes.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> hess(d * d);
        for (std::size_t k = b; k < e; ++k) {
            const std::size_t i = nodes[k];
            if (!g.core(i)) continue;
            node_hessian(u, i, hess);
            for (double v : hess) scale[k] = std::max(scale[k], std::abs(v));
            least[k] = least_quaternionic_eigenvalue(g.n(), hess);
        }
    });
    PshReport r;
    double s = 0.0;
    for (double v : scale) s = std::max(s, v);
    r.tolerance = tol >= 0.0 ? tol : default_psh_tolerance(g, s);
    r.least_eigenvalue = std::numeric_limits<double>::infinity();
    std::size_t worst = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (!std::isfinite(least[k])) continue;
        ++r.tested_nodes;
        if (least[k] < -r.tolerance) ++r.violations;
        if (least[k] < r.least_eigenvalue) {
            r.least_eigenvalue = least[k];
            worst = nodes[k];
        }
    }
    if (r.tested_nodes == 0) {
        r.least_eigenvalue = 0.0;
        return r;
    }
    r.worst_violation = std::min(0.0, r.least_eigenvalue);
    r.is_psh = r.violations == 0;
    if (r.least_eigenvalue < 0.0) r.violating_node = g.coords(worst);
    return r;
}

struct ObstacleSpec {
    GridField obstacle;                  // upper barrier on interior nodes
    GridField boundary;                  // values held fixed on non-interior nodes
    std::optional<Region> K;             // where u <= k_value
    std::vector<std::uint8_t> k_mask{};  // derived from K when empty
    double k_value = -1.0;

    ObstacleSpec(GridField obstacle_, GridField boundary_, std::optional<Region> K_ = std::nullopt, double k = -1.0)
        : obstacle(std::move(obstacle_)), boundary(std::move(boundary_)), K(std::move(K_)), k_value(k) {
        obstacle.check_same_grid(boundary);
        const Grid& g = obstacle.grid();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!g.interior(i) && boundary[i] > obstacle[i] + 1e-12)
                throw DomainError("ObstacleSpec: boundary trace exceeds the obstacle");
        k_mask.assign(g.size(), 0);
        if (K) {
            std::vector<double> x(static_cast<std::size_t>(g.dim()));
            for (std::size_t i = 0; i < g.size(); ++i) {
                g.coords(i, x);
                k_mask[i] = K->contains(x) ? 1 : 0;
            }
        }
    }

    /// Obstacle field from the binary format; K from a region JSON (ball, box, union).
    static ObstacleSpec load(const GridField& obstacle, const nlohmann::json& k_region, double k = -1.0) {
        std::optional<Region> K;
        if (!k_region.is_null()) K = Region::from_json(k_region, obstacle.grid().dim());
        return ObstacleSpec(obstacle, obstacle, std::move(K), k);
    }

    bool in_K(std::size_t i) const { return k_mask[i] != 0; }
};

struct EnvelopeOptions {
    double tol = 1e-8;           // stop when the sup of a sweep's changes drops below this
    long max_sweeps = 100000;
    double omega = 0.0;          // over-relaxation at n = 1; 0 selects 2/(1+sin(pi/(m-1)))
    bool cut_cells = true;       // Shortley-Weller arms at crossings of K and the domain (n = 1)
};

struct EnvelopeResult {
    GridField u;
    long sweeps = 0;
    double last_change = 0.0;
};

namespace detail {

struct CutNode {
    std::uint32_t node;
    std::array<std::size_t, 8> nbr;   // neighbour index or SIZE_MAX for a fixed value
    std::array<double, 8> weight;
    std::array<double, 8> fixed;
    double wsum;
};

inline std::vector<double> barrier(const ObstacleSpec& s) {
    const Grid& g = s.obstacle.grid();
    std::vector<double> b(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g.interior(i)) {
            b[i] = s.boundary[i];
            continue;
        }
        b[i] = s.obstacle[i];
        if (s.in_K(i)) b[i] = std::min(b[i], s.k_value);
    }
    return b;
}

inline std::vector<CutNode> cut_nodes_n1(const ObstacleSpec& s) {
    const Grid& g = s.obstacle.grid();
    std::vector<CutNode> out;
    if (!s.K && !g.domain()) return out;
    std::vector<double> x(4), y(4);
    for (std::uint32_t i : g.interior_nodes()) {
        if (s.in_K(i)) continue;  // pinned by the K barrier whenever it is active
        g.coords(i, x);
        CutNode c{i, {}, {}, {}, 0.0};
        bool any = false;
        std::array<double, 8> theta{};
        for (int a = 0; a < 4; ++a) {
            const double h = g.h(a);
            for (int sgn : {-1, 1}) {
                const auto slot = static_cast<std::size_t>(2 * a + (sgn > 0 ? 1 : 0));
                const std::size_t j = sgn > 0 ? i + g.stride(a) : i - g.stride(a);
                double t = h, value = 0.0;
                bool fixed = false;
                if (g.domain()) {
                    g.coords(j, y);
                    if (!g.domain()->contains(y)) {
                        const double hit = g.domain()->ray_hit(x, a, sgn, h);
                        t = std::isfinite(hit) ? hit : h;
                        value = s.boundary[j];
                        fixed = true;
                    }
                }
                if (s.K) {
                    const double hit = s.K->ray_hit(x, a, sgn, h);
                    if (std::isfinite(hit) && hit < t) {
                        t = hit;
                        value = s.k_value;
                        fixed = true;
                    }
                }
                theta[slot] = std::max(t / h, 1e-6);
                if (fixed && theta[slot] < 1.0 - 1e-12) {
                    any = true;
                    c.nbr[slot] = std::numeric_limits<std::size_t>::max();
                    c.fixed[slot] = value;
                } else {
                    theta[slot] = 1.0;
                    c.nbr[slot] = j;
                    c.fixed[slot] = 0.0;
                }
            }
        }
        if (!any) continue;
        for (int a = 0; a < 4; ++a) {
            const double tm = theta[static_cast<std::size_t>(2 * a)], tp = theta[static_cast<std::size_t>(2 * a + 1)];
            c.weight[static_cast<std::size_t>(2 * a)] = 1.0 / (tm * (tm + tp));
            c.weight[static_cast<std::size_t>(2 * a + 1)] = 1.0 / (tp * (tm + tp));
        }
        for (double w : c.weight) c.wsum += w;
        out.push_back(c);
    }
    return out;
}

// Lattice vectors (p e_a, q e_a), a = 0..3, spanning the right quaternionic
// line through (p, q); q in {-1,0,1}^4 with p = 1, plus the line (0, 1).
inline std::vector<std::array<std::array<int, 8>, 4>> right_line_vectors() {
    std::vector<std::array<std::array<int, 8>, 4>> lines;
    auto add_line = [&](const std::array<int, 4>& p, const std::array<int, 4>& q) {
        std::array<std::array<int, 8>, 4> line{};
        for (int a = 0; a < 4; ++a) {
            const auto pa = right_unit_multiply(p, a), qa = right_unit_multiply(q, a);
            for (std::size_t k = 0; k < 4; ++k) {
                line[static_cast<std::size_t>(a)][k] = pa[k];
                line[static_cast<std::size_t>(a)][k + 4] = qa[k];
            }
        }
        lines.push_back(line);
    };
    const std::array<int, 4> one{1, 0, 0, 0}, zero{0, 0, 0, 0};
    for (int code = 0; code < 81; ++code) {
        std::array<int, 4> q{};
        int c = code;
        for (auto& qk : q) {
            qk = c % 3 - 1;
            c /= 3;
        }
        add_line(one, q);
    }
    add_line(zero, one);
    return lines;
}

// Diagonal entries and the off-diagonal quaternion of the n = 2 FD
// quaternionic Hessian at node i, computed straight from the stencil.
struct HessianN2 {
    std::array<std::ptrdiff_t, 8> stride;
    std::array<double, 8> inv_h2;
    std::array<std::array<double, 4>, 16> mixed_weight;  // [b*4+a] -> unit-signed 1/(4 h_b h_{4+a})

    explicit HessianN2(const Grid& g) {
        for (int k = 0; k < 8; ++k) {
            stride[static_cast<std::size_t>(k)] = static_cast<std::ptrdiff_t>(g.stride(k));
            inv_h2[static_cast<std::size_t>(k)] = 1.0 / (g.h(k) * g.h(k));
        }
        const auto& t = unit_conj_table();
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const auto& p = t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                std::array<double, 4> w{};
                w[static_cast<std::size_t>(p.unit)] = p.sign / (4.0 * g.h(b) * g.h(4 + a));
                mixed_weight[static_cast<std::size_t>(b * 4 + a)] = w;
            }
    }

    // returns {H00, H11, |H01|^2}
    std::array<double, 3> at(const std::vector<double>& v, std::size_t i) const {
        const auto ii = static_cast<std::ptrdiff_t>(i);
        auto val = [&](std::ptrdiff_t off) { return v[static_cast<std::size_t>(ii + off)]; };
        const double c2 = 2.0 * v[i];
        double diag[2] = {0.0, 0.0};
        for (std::size_t k = 0; k < 8; ++k) diag[k / 4] += (val(stride[k]) + val(-stride[k]) - c2) * inv_h2[k];
        std::array<double, 4> q{};
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t a = 0; a < 4; ++a) {
                const std::ptrdiff_t sb = stride[b], sa = stride[4 + a];
                const double mixed = val(sb + sa) - val(sb - sa) - val(-sb + sa) + val(-sb - sa);
                const auto& w = mixed_weight[b * 4 + a];
                for (std::size_t c = 0; c < 4; ++c) q[c] += w[c] * mixed;
            }
        return {diag[0], diag[1], q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]};
    }
};

} // namespace detail

/// Largest discrete PSH function below the barrier with the given trace.
/// n = 1: projected SOR on the (cut-cell) Laplace mean. n = 2: Gauss-Seidel
/// eigenvalue clipping, each node moved to where the least eigenvalue of its
/// FD quaternionic Hessian vanishes, capped by the barrier.
inline EnvelopeResult envelope(const ObstacleSpec& s, const EnvelopeOptions& opt = {},
                               const GridField* initial = nullptr) {
    const Grid& g = s.obstacle.grid();
    require(opt.tol > 0.0 && opt.max_sweeps > 0, "envelope: bad options");
    const auto b = detail::barrier(s);
    GridField u(s.obstacle.grid_ptr(), b);
    if (initial) {
        initial->check_same_grid(s.obstacle);
        for (std::uint32_t i : g.interior_nodes()) u[i] = std::min((*initial)[i], b[i]);
    }
    auto& v = u.values();
    const auto& nodes = g.interior_nodes();
    double change = std::numeric_limits<double>::infinity();
    long sweep = 0;

    if (g.n() == 1) {
        const double omega = opt.omega > 0.0 ? opt.omega : 2.0 / (1.0 + std::sin(std::numbers::pi / (g.m() - 1)));
        const auto cuts = opt.cut_cells ? detail::cut_nodes_n1(s) : std::vector<detail::CutNode>{};
        std::vector<std::int32_t> cut_of(g.size(), -1);
        for (std::size_t c = 0; c < cuts.size(); ++c) cut_of[cuts[c].node] = static_cast<std::int32_t>(c);
        std::array<double, 4> w{};
        double wsum = 0.0;
        for (int a = 0; a < 4; ++a) {
            w[static_cast<std::size_t>(a)] = 1.0 / (g.h(a) * g.h(a));
            wsum += 2.0 * w[static_cast<std::size_t>(a)];
        }
        const std::array<std::size_t, 4> st{g.stride(0), g.stride(1), g.stride(2), g.stride(3)};
        while (change >= opt.tol && sweep < opt.max_sweeps) {
            change = 0.0;
            for (std::uint32_t i : nodes) {
                double mean;
                if (const auto c = cut_of[i]; c >= 0) {
                    const auto& cn = cuts[static_cast<std::size_t>(c)];
                    double acc = 0.0;
                    for (std::size_t k = 0; k < 8; ++k) {
                        const double val = cn.nbr[k] == std::numeric_limits<std::size_t>::max() ? cn.fixed[k] : v[cn.nbr[k]];
                        // arm weights scale with 1/h_a^2 on anisotropic grids
                        acc += cn.weight[k] * w[k / 2] * val;
                    }
                    double ws = 0.0;
                    for (std::size_t k = 0; k < 8; ++k) ws += cn.weight[k] * w[k / 2];
                    mean = acc / ws;
                } else {
                    double acc = 0.0;
                    for (std::size_t a = 0; a < 4; ++a) acc += w[a] * (v[i + st[a]] + v[i - st[a]]);
                    mean = acc / wsum;
                }
                const double next = std::min(b[i], v[i] + omega * (mean - v[i]));
                change = std::max(change, std::abs(next - v[i]));
                v[i] = next;
            }
            ++sweep;
        }
    } else {
        // Lowering u_i by d adds d * c_j to the j-th diagonal entry and leaves the
        // off-diagonal entry alone; solve for the shift that zeroes the least eigenvalue.
        const detail::HessianN2 hq(g);
        double c0 = 0.0, c1 = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            c0 += 2.0 * hq.inv_h2[k];
            c1 += 2.0 * hq.inv_h2[k + 4];
        }
        while (change >= opt.tol && sweep < opt.max_sweeps) {
            change = 0.0;
            for (std::uint32_t i : nodes) {
                const auto [a, bb, q2] = hq.at(v, i);
                // (a + c0 d)(bb + c1 d) = |q|^2 on the branch a + c0 d >= 0
                const double A = c0 * c1, B = a * c1 + bb * c0, C = a * bb - q2;
                const double d = (-B + std::sqrt(std::max(B * B - 4.0 * A * C, 0.0))) / (2.0 * A);
                const double next = std::min(b[i], v[i] - d);
                change = std::max(change, std::abs(next - v[i]));
                v[i] = next;
            }
            ++sweep;
        }
    }
    if (change >= opt.tol)
        throw ConvergenceError("envelope: no convergence within the sweep budget", change, sweep);
    return {std::move(u), sweep, change};
}

/// Relative extremal function of K: sup{v PSH, v <= 0, v <= -1 on K, zero trace}.
inline EnvelopeResult extremal_function(const GridPtr& g, const Region& K, const EnvelopeOptions& opt = {}) {
    ObstacleSpec s(GridField(g, 0.0), GridField(g, 0.0), K, -1.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < g->size(); ++i) {
        if (!s.in_K(i)) continue;
        if (!g->interior(i)) throw DomainError("extremal_function: K must lie strictly inside the domain");
        ++count;
    }
    if (count == 0) throw DomainError("extremal_function: K contains no grid node");
    GridField start(g, 0.0);
    for (std::uint32_t i : g->interior_nodes()) start[i] = -1.0;
    return envelope(s, opt, &start);
}

/// P(u): largest PSH minorant of u whose trace is min(trace u, 0).
inline EnvelopeResult project_P_result(const GridField& u, const EnvelopeOptions& opt = {}) {
    GridField trace = u;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (!u.grid().interior(i)) trace[i] = std::min(u[i], 0.0);
    ObstacleSpec s(u, std::move(trace));
    return envelope(s, opt);
}

inline GridField project_P(const GridField& u, const EnvelopeOptions& opt = {}) {
    return project_P_result(u, opt).u;
}

/// Distance to the boundary of the domain (box intersected with the optional
/// region); zero off the interior. Exact for boxes and single balls, an
/// axis-ray upper bound for general unions.
inline GridField distance_to_boundary(const GridPtr& g) {
    GridField dist(g, 0.0);
    std::vector<double> x(static_cast<std::size_t>(g->dim()));
    const auto& dom = g->domain();
    const Ball* single_ball = nullptr;
    if (dom && dom->parts().size() == 1) single_ball = std::get_if<Ball>(&dom->parts()[0]);
    double extent = 0.0;
    for (int a = 0; a < g->dim(); ++a) extent = std::max(extent, g->hi(a) - g->lo(a));
    for (std::uint32_t i : g->interior_nodes()) {
        g->coords(i, x);
        double d = std::numeric_limits<double>::infinity();
        for (int a = 0; a < g->dim(); ++a)
            d = std::min({d, x[static_cast<std::size_t>(a)] - g->lo(a), g->hi(a) - x[static_cast<std::size_t>(a)]});
        if (single_ball) {
            double r2 = 0.0;
            for (std::size_t a = 0; a < x.size(); ++a) r2 += (x[a] - single_ball->center[a]) * (x[a] - single_ball->center[a]);
            d = std::min(d, single_ball->radius - std::sqrt(r2));
        } else if (dom) {
            for (int a = 0; a < g->dim(); ++a)
                for (int sgn : {-1, 1}) d = std::min(d, dom->ray_hit(x, a, sgn, extent));
        }
        dist[i] = std::max(d, 0.0);
    }
    return dist;
}

/// Negative PSH exhaustion function: P applied to the negated distance to the boundary.
inline GridField exhaustion_function(const GridPtr& g, const EnvelopeOptions& opt = {}) {
    return project_P(-distance_to_boundary(g), opt);
}

/// Closed-form relative extremal function of the ball B(a, r) in B(a, R) (n = 1).
inline double ball_annulus_extremal(double dist, double r, double R) {
    if (dist <= r) return -1.0;
    return std::max(-1.0, (1.0 / (R * R) - 1.0 / (dist * dist)) / (1.0 / (r * r) - 1.0 / (R * R)));
}

} // namespace qma
