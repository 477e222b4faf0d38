#pragma once

// Dirichlet problem (Delta phi)^n = mu: a direct linear solve at n = 1 and
// projected descent on F_mu for n = 1, 2; derivative-formula and
// subsolution verifiers; measure generators.

#include "qma/energy.hpp"
#include "qma/error.hpp"
#include "qma/geometry.hpp"
#include "qma/grid.hpp"
#include "qma/parallel.hpp"
#include "qma/psh.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace qma {

// ---------------------------------------------------------------- linear algebra

/// Discrete Laplacian sum_a D_aa at interior nodes. Values off the interior
/// are read from x (Dirichlet data); out is zero there.
inline void apply_laplacian(const Grid& g, std::span<const double> x, std::span<double> out) {
    detail::require_interior_stencil(g);
    const auto& nodes = g.interior_nodes();
    parallel_chunks(nodes.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            const std::size_t i = nodes[k];
            double s = 0.0;
            for (int a = 0; a < g.dim(); ++a) {
                const std::size_t st = g.stride(a);
                s += (x[i + st] - 2.0 * x[i] + x[i - st]) / (g.h(a) * g.h(a));
            }
            out[i] = s;
        }
    });
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!g.interior(i)) out[i] = 0.0;
}

struct CgResult {
    std::vector<double> x;
    int iterations = 0;
    double residual = 0.0;  // final ||r||_2 / ||b||_2
};

/// Conjugate gradients for -L x = b with x = 0 off the interior.
inline CgResult solve_negative_laplacian(const Grid& g, std::span<const double> b, double tol = 1e-12,
                                         int max_iters = 20000) {
    const std::size_t N = g.size();
    const auto& nodes = g.interior_nodes();
    auto dot = [&](const std::vector<double>& p, const std::vector<double>& q) {
        CompensatedSum s;
        for (std::uint32_t i : nodes) s.add(p[i] * q[i]);
        return s.value();
    };
    CgResult out{std::vector<double>(N, 0.0), 0, 0.0};
    std::vector<double> r(N, 0.0), p(N, 0.0), Ap(N, 0.0);
    for (std::uint32_t i : nodes) r[i] = b[i];
    const double bnorm = std::sqrt(dot(r, r));
    if (bnorm == 0.0) return out;
    p = r;
    double rr = dot(r, r);
    for (int it = 1; it <= max_iters; ++it) {
        apply_laplacian(g, p, Ap);
        for (std::uint32_t i : nodes) Ap[i] = -Ap[i];
        const double alpha = rr / dot(p, Ap);
        for (std::uint32_t i : nodes) {
            out.x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        const double rr_new = dot(r, r);
        out.iterations = it;
        out.residual = std::sqrt(rr_new) / bnorm;
        if (out.residual <= tol) return out;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::uint32_t i : nodes) p[i] = r[i] + beta * p[i];
    }
    throw ConvergenceError("conjugate gradients did not converge", out.residual, out.iterations);
}

/// sup of the discrete torsion function w (-L w = 1, w = 0 off the interior):
/// the norm of (-L)^{-1} from sup-norm to sup-norm.
inline double inverse_laplacian_norm(const GridPtr& g) {
    const std::vector<double> one(g->size(), 1.0);
    const auto w = solve_negative_laplacian(*g, one);
    double s = 0.0;
    for (double v : w.x) s = std::max(s, std::abs(v));
    return s;
}

// ---------------------------------------------------------------- configuration

enum class SolveMethod { DirectN1, Variational };

inline const char* to_string(SolveMethod m) { return m == SolveMethod::DirectN1 ? "direct-n1" : "variational"; }

inline SolveMethod solve_method_from_string(const std::string& s) {
    if (s == "direct-n1" || s == "direct") return SolveMethod::DirectN1;
    if (s == "variational") return SolveMethod::Variational;
    throw DomainError("unknown solve method: " + s);
}

struct SolveConfig {
    SolveMethod method = SolveMethod::Variational;
    int max_iters = 200;
    double armijo_c = 1e-4;       // sufficient decrease
    double armijo_shrink = 0.5;
    double min_step = 1e-6;
    double tol_residual = 1e-6;   // sup |MA(phi) - mu| relative to sup mu
    double tol_energy = 1e-12;    // |F_k - F_{k+1}| relative to max(1, |F_k|)
    double cg_tol = 1e-12;
    EnvelopeOptions envelope{};

    void validate() const {
        require(max_iters > 0 && armijo_c > 0.0 && armijo_c < 1.0 && armijo_shrink > 0.0 && armijo_shrink < 1.0 &&
                    min_step > 0.0 && tol_residual > 0.0 && tol_energy > 0.0 && cg_tol > 0.0,
                "SolveConfig: tolerances and step parameters must be positive");
    }
};

struct SolveResult {
    GridField phi;
    SolveMethod method = SolveMethod::Variational;
    double residual = 0.0;      // sup-node |MA(phi) - mu|
    double residual_rel = 0.0;  // residual / sup mu
    std::vector<double> energy_trace;
    std::vector<double> step_trace;
    int iterations = 0;
    int polish_steps = 0;      // steps accepted on residual decrease after F stalled
    double energy_rise = 0.0;  // largest F increase among those steps
    bool converged = false;
    std::string status;
    PshReport psh;

    nlohmann::json to_json() const {
        return {{"method", to_string(method)}, {"residual", residual}, {"residual_rel", residual_rel},
                {"iterations", iterations},     {"converged", converged}, {"status", status},
                {"energy_trace", energy_trace}, {"step_trace", step_trace}, {"polish_steps", polish_steps},
                {"energy_rise", energy_rise},   {"psh", psh.to_json()}};
    }
};

// ---------------------------------------------------------------- helpers

namespace detail {

inline double sup_interior(const Grid& g, std::span<const double> f) {
    double s = 0.0;
    for (std::uint32_t i : g.interior_nodes()) s = std::max(s, std::abs(f[i]));
    return s;
}

inline GridField trace_field(const GridPtr& g, const GridField* trace) {
    GridField t(g, 0.0);
    if (trace) {
        t.check_same_grid(*trace);
        for (std::size_t i = 0; i < g->size(); ++i)
            if (!g->interior(i)) t[i] = (*trace)[i];
    }
    return t;
}

inline bool has_nonzero_trace(const GridField& t) { return t.trace_sup_norm() > 0.0; }

inline void require_nonnegative(const MeasureDensity& mu) {
    for (double d : mu.density)
        if (!(d >= 0.0) || !std::isfinite(d)) throw DomainError("solve: measure density must be finite and >= 0");
}

} // namespace detail

/// Largest PSH minorant of u whose boundary values are those of `trace`.
inline GridField project_with_trace(const GridField& u, const GridField& trace, const EnvelopeOptions& opt = {}) {
    GridField obs = u;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (!u.grid().interior(i)) obs[i] = trace[i];
    return envelope(ObstacleSpec(obs, obs), opt, &obs).u;
}

/// Maximal PSH function with the given trace: (Delta psi0)^n = 0 inside.
inline GridField maximal_extension(const GridField& trace, const EnvelopeOptions& opt = {}) {
    const Grid& g = trace.grid();
    double top = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!g.interior(i)) top = std::max(top, trace[i]);
    GridField start = trace;
    for (std::uint32_t i : g.interior_nodes()) start[i] = top;
    return project_with_trace(start, trace, opt);
}

/// sup-node |MA(phi) - mu| over interior nodes (unclamped density).
inline double ma_residual(const GridField& phi, const MeasureDensity& mu) {
    const auto raw = ma_values(std::span<const GridField* const>(detail::repeat(phi)));
    double r = 0.0;
    for (std::uint32_t i : phi.grid().interior_nodes()) r = std::max(r, std::abs(raw.value[i] - mu.density[i]));
    return r;
}

/// F_mu relative to a PSH reference psi0 with the same trace:
///   (1/(n+1)) sum_k int (psi0 - phi) (Delta phi)^k ^ (Delta psi0)^{n-k} + int (phi - psi0) dmu.
/// With psi0 = 0 this is E(phi)/(n+1) + int phi dmu.
inline double functional_F_relative(const GridField& phi, const GridField& psi0, const MeasureDensity& mu) {
    const int n = phi.grid().n();
    const GridField gap = psi0 - phi;
    double s = 0.0;
    const bool zero_ref = psi0.sup_norm() == 0.0;
    for (int k = zero_ref ? n : 0; k <= n; ++k) {
        std::vector<const GridField*> args(static_cast<std::size_t>(k), &phi);
        args.insert(args.end(), static_cast<std::size_t>(n - k), &psi0);
        s += integrate(gap, ma_density(std::span<const GridField* const>(args)));
    }
    return s / (n + 1) + integrate(phi - psi0, mu);
}

// ---------------------------------------------------------------- solvers

/// n = 1: the density is the Laplacian, so (Delta phi) = mu is the linear
/// Dirichlet problem L phi = mu, phi = trace off the interior; solved by CG.
inline SolveResult solve_direct_n1(const MeasureDensity& mu, const GridField* trace = nullptr,
                                   const SolveConfig& cfg = {}) {
    const GridPtr& gp = mu.grid;
    const Grid& g = *gp;
    if (g.n() != 1) throw DomainError("solve_direct_n1: requires n = 1");
    cfg.validate();
    detail::require_nonnegative(mu);
    const GridField t = detail::trace_field(gp, trace);
    // -L phi0 = -mu + L t  with phi0 zero off the interior
    std::vector<double> Lt(g.size(), 0.0), rhs(g.size(), 0.0);
    apply_laplacian(g, t.values(), Lt);
    for (std::uint32_t i : g.interior_nodes()) rhs[i] = Lt[i] - mu.density[i];
    const auto cg = solve_negative_laplacian(g, rhs, cfg.cg_tol);
    SolveResult r;
    r.method = SolveMethod::DirectN1;
    r.phi = t;
    for (std::uint32_t i : g.interior_nodes()) r.phi[i] = cg.x[i];
    r.iterations = cg.iterations;
    r.residual = ma_residual(r.phi, mu);
    const double smu = detail::sup_interior(g, mu.density);
    r.residual_rel = smu > 0.0 ? r.residual / smu : r.residual;
    r.converged = true;
    r.status = "converged";
    r.psh = psh_test(r.phi);
    if (!detail::has_nonzero_trace(t)) r.energy_trace.push_back(functional_F(r.phi, mu));
    return r;
}

/// Projected descent on F_mu: phi <- P(phi - s c (-L)^{-1}(mu - MA(phi))) with
/// Armijo backtracking; c = 1 at n = 1 and 1/sqrt(2 mean MA(phi)) at n = 2.
inline SolveResult solve_variational(const MeasureDensity& mu, const SolveConfig& cfg = {},
                                     const GridField* trace = nullptr, const GridField* initial = nullptr) {
    const GridPtr& gp = mu.grid;
    const Grid& g = *gp;
    const int n = g.n();
    cfg.validate();
    detail::require_nonnegative(mu);
    const GridField t = detail::trace_field(gp, trace);
    const bool with_trace = detail::has_nonzero_trace(t);
    const GridField psi0 = with_trace ? maximal_extension(t, cfg.envelope) : GridField(gp, 0.0);
    const double smu = detail::sup_interior(g, mu.density);

    SolveResult r;
    r.method = SolveMethod::Variational;
    auto finish = [&](GridField phi, std::string status, bool ok) {
        r.phi = std::move(phi);
        r.residual = ma_residual(r.phi, mu);
        r.residual_rel = smu > 0.0 ? r.residual / smu : r.residual;
        r.status = std::move(status);
        r.converged = ok;
        r.psh = psh_test(r.phi);
        return r;
    };
    const double mass = mu.total_mass();
    if (mass == 0.0) {
        r.energy_trace.push_back(functional_F_relative(psi0, psi0, mu));
        return finish(psi0, "zero measure", true);
    }

    GridField phi(gp, 0.0);
    if (initial) {
        phi = project_with_trace(*initial, t, cfg.envelope);
    } else {
        const GridField rho = exhaustion_function(gp, cfg.envelope);
        const double m0 = ma_density(rho).total_mass();
        const double c = m0 > 0.0 ? std::pow(mass / m0, 1.0 / n) : 1.0;
        phi = project_with_trace(psi0 + c * rho, t, cfg.envelope);
    }
    double F = functional_F_relative(phi, psi0, mu);
    r.energy_trace.push_back(F);
    double step = 1.0;
    bool polish = false;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        r.iterations = it;
        const auto ma = ma_values(std::span<const GridField* const>(detail::repeat(phi)));
        std::vector<double> gvec(g.size(), 0.0);
        double res = 0.0, mean = 0.0;
        for (std::uint32_t i : g.interior_nodes()) {
            gvec[i] = mu.density[i] - ma.value[i];
            res = std::max(res, std::abs(gvec[i]));
            mean += std::max(ma.value[i], 0.0);
        }
        mean /= static_cast<double>(g.interior_nodes().size());
        if (res <= cfg.tol_residual * smu) return finish(phi, "converged: residual", true);
        auto dir = solve_negative_laplacian(g, gvec, cfg.cg_tol).x;
        const double scale = n == 1 ? 1.0 : 1.0 / std::sqrt(2.0 * std::max(mean, 1e-300));
        double slope = 0.0;  // dF along -dir
        {
            CompensatedSum s;
            for (std::uint32_t i : g.interior_nodes()) {
                dir[i] *= -scale;
                s.add(dir[i] * gvec[i]);
            }
            slope = s.value() * g.cell_volume();
        }
        step = std::min(1.0, 2.0 * step);
        bool accepted = false;
        GridField next(gp, 0.0);
        double Fn = F;
        if (!polish) {
            while (step >= cfg.min_step) {
                GridField cand = phi;
                for (std::uint32_t i : g.interior_nodes()) cand[i] += step * dir[i];
                next = project_with_trace(cand, t, cfg.envelope);
                Fn = functional_F_relative(next, psi0, mu);
                if (Fn <= F + cfg.armijo_c * step * slope) {
                    accepted = true;
                    break;
                }
                step *= cfg.armijo_shrink;
            }
            if (!accepted) {
                polish = true;
                step = 1.0;
            }
        }
        if (polish) {
            // F is stationary along the direction to grid accuracy: backtrack on the residual instead
            while (step >= cfg.min_step) {
                GridField cand = phi;
                for (std::uint32_t i : g.interior_nodes()) cand[i] += step * dir[i];
                next = project_with_trace(cand, t, cfg.envelope);
                if (ma_residual(next, mu) < (1.0 - cfg.armijo_c * step) * res) {
                    Fn = functional_F_relative(next, psi0, mu);
                    accepted = true;
                    break;
                }
                step *= cfg.armijo_shrink;
            }
            if (!accepted) return finish(phi, "line search stalled", false);
            r.polish_steps++;
            r.energy_rise = std::max(r.energy_rise, Fn - F);
        }
        const double dF = F - Fn;
        phi = std::move(next);
        F = Fn;
        r.energy_trace.push_back(F);
        r.step_trace.push_back(step);
        if (!polish && dF <= cfg.tol_energy * std::max(1.0, std::abs(F)))
            return finish(phi, "converged: energy change", true);
    }
    return finish(phi, "iteration limit", false);
}

inline SolveResult solve(const MeasureDensity& mu, const SolveConfig& cfg = {}, const GridField* trace = nullptr,
                         const GridField* initial = nullptr) {
    if (cfg.method == SolveMethod::DirectN1) return solve_direct_n1(mu, trace, cfg);
    return solve_variational(mu, cfg, trace, initial);
}

// ---------------------------------------------------------------- verifiers

struct DerivativeSample {
    double t = 0.0;
    double quotient = 0.0;  // (E(P(u + t v)) - E(u)) / t
    double rel_error = 0.0;
    double h_t_integral = 0.0;  // int h_t (Delta u)^n, h_t = (P(u + t v) - t v - u) / t

    nlohmann::json to_json() const {
        return {{"t", t}, {"quotient", quotient}, {"rel_error", rel_error}, {"h_t_integral", h_t_integral}};
    }
};

struct DerivativeReport {
    double formula = 0.0;  // (n + 1) int (-v) (Delta u)^n
    std::vector<DerivativeSample> samples;

    nlohmann::json to_json() const {
        nlohmann::json s = nlohmann::json::array();
        for (const auto& x : samples) s.push_back(x.to_json());
        return {{"formula", formula}, {"samples", s}};
    }
};

/// One-sided difference quotients of t -> E(P(u + t v)) against (n+1) int (-v) (Delta u)^n.
inline DerivativeReport check_derivative_formula(const GridField& u, const GridField& v,
                                                 std::vector<double> ts = {1e-2, 1e-3, 1e-4, -1e-2, -1e-3, -1e-4},
                                                 const EnvelopeOptions& opt = {}) {
    u.check_same_grid(v);
    detail::require_nonpositive(u, "check_derivative_formula");
    detail::require_nonpositive(v, "check_derivative_formula");
    const int n = u.grid().n();
    const auto mu_u = ma_density(u);
    DerivativeReport rep;
    rep.formula = (n + 1) * integrate(-v, mu_u);
    const double E0 = energy(u);
    for (double t : ts) {
        DerivativeSample s;
        s.t = t;
        const GridField w = project_P(u + t * v, opt);
        s.quotient = (energy(w) - E0) / t;
        const double denom = std::abs(rep.formula);
        s.rel_error = denom > 0.0 ? std::abs(s.quotient - rep.formula) / denom : std::abs(s.quotient);
        s.h_t_integral = integrate((1.0 / t) * (w - t * v - u), mu_u);
        rep.samples.push_back(s);
    }
    return rep;
}

struct SubsolutionReport {
    SolveResult solve;
    double below_psi = 0.0;   // max(psi - phi), should be <= tol
    double above_zero = 0.0;  // max(phi)
    double tol = 0.0;
    bool passed = false;

    nlohmann::json to_json() const {
        return {{"solve", solve.to_json()}, {"below_psi", below_psi}, {"above_zero", above_zero},
                {"tol", tol},               {"passed", passed}};
    }
};

/// psi bounded PSH with zero trace and mu <= (Delta psi)^n: the solution satisfies psi <= phi <= 0.
inline SubsolutionReport check_subsolution_solve(const GridField& psi, const MeasureDensity& mu,
                                                 const SolveConfig& cfg = {}, double tol = 1e-6) {
    const Grid& g = psi.grid();
    require(g.same_as(*mu.grid), "check_subsolution_solve: grid mismatch");
    const auto mpsi = ma_values(std::span<const GridField* const>(detail::repeat(psi)));
    double scale = 0.0;
    for (std::uint32_t i : g.interior_nodes()) scale = std::max(scale, std::abs(mpsi.value[i]));
    for (std::uint32_t i : g.interior_nodes())
        if (mu.density[i] > mpsi.value[i] + 1e-9 * std::max(1.0, scale))
            throw DomainError("check_subsolution_solve: mu must be <= (Delta psi)^n");
    if (psi.trace_sup_norm() > 1e-12) throw DomainError("check_subsolution_solve: psi must have zero trace");
    SubsolutionReport rep;
    rep.solve = solve(mu, cfg);
    rep.tol = tol * std::max(1.0, psi.sup_norm());
    rep.below_psi = (psi - rep.solve.phi).max_value();
    rep.above_zero = rep.solve.phi.max_value();
    rep.passed = rep.below_psi <= rep.tol && rep.above_zero <= rep.tol;
    return rep;
}

// ---------------------------------------------------------------- measure generators

/// A problem instance: measure plus boundary data (and the exact solution when manufactured).
struct Problem {
    MeasureDensity mu;
    GridField trace;
    std::optional<GridField> exact;
};

inline Problem constant_problem(const GridPtr& g, double c) {
    require(c >= 0.0, "constant measure must be >= 0");
    return {MeasureDensity::constant(g, c), GridField(g, 0.0), std::nullopt};
}

inline Problem ball_problem(const GridPtr& g, std::vector<double> center, double radius, double c) {
    require(c >= 0.0 && radius > 0.0, "ball measure: value >= 0 and radius > 0 required");
    require(static_cast<int>(center.size()) == g->dim(), "ball measure: center dimension mismatch");
    std::vector<double> d(g->size(), 0.0), x(static_cast<std::size_t>(g->dim()));
    for (std::uint32_t i : g->interior_nodes()) {
        g->coords(i, x);
        double s = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a) s += (x[a] - center[a]) * (x[a] - center[a]);
        if (s <= radius * radius) d[i] = c;
    }
    return {MeasureDensity(g, std::move(d)), GridField(g, 0.0), std::nullopt};
}

/// mu = MA(u), trace = u off the interior.
inline Problem manufactured_problem(const GridField& u) {
    const GridPtr& g = u.grid_ptr();
    const auto mu = ma_density(u);
    if (mu.non_psh) throw DomainError("manufactured measure: field is not PSH");
    return {mu, detail::trace_field(g, &u), u};
}

/// ||x||^2 - shift.
inline GridField norm_squared_field(const GridPtr& g, double shift = 1.0) {
    return GridField::sample(g, [shift](std::span<const double> x) {
        double s = -shift;
        for (double c : x) s += c * c;
        return s;
    });
}

/// JSON generator spec: {"type": "constant", "value": c} |
/// {"type": "ball", "center": [...], "radius": r, "value": c} |
/// {"type": "manufactured", "field": "norm_squared", "shift": s}.
inline Problem problem_from_json(const GridPtr& g, const nlohmann::json& j) {
    const std::string type = j.value("type", "constant");
    if (type == "constant") return constant_problem(g, j.value("value", 1.0));
    if (type == "ball") {
        auto center = j.value("center", std::vector<double>(static_cast<std::size_t>(g->dim()), 0.0));
        return ball_problem(g, std::move(center), j.value("radius", 0.5), j.value("value", 1.0));
    }
    if (type == "manufactured") {
        const std::string field = j.value("field", "norm_squared");
        if (field != "norm_squared") throw DomainError("manufactured measure: unknown field " + field);
        return manufactured_problem(norm_squared_field(g, j.value("shift", 1.0)));
    }
    throw DomainError("unknown measure type: " + type);
}

} // namespace qma
