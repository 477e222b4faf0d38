#pragma once

// Energies, the bilinear form gamma(u, v) = 1/2 (d0 u ^ d1 v - d1 u ^ d0 v),
// the functional F_mu, and verifiers for the energy-theoretic inequalities.
// Every verifier returns margins rhs - lhs against an explicit tolerance.

#include "qma/error.hpp"
#include "qma/grid.hpp"
#include "qma/poly.hpp"
#include "qma/psh.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace qma {

// ---------------------------------------------------------------- gamma

/// Symbolic gamma(u, v).
inline PolyForm gamma_form(int n, const PolyField& u, const PolyField& v) {
    const PolyForm du0 = d0(as_form(n, u)), du1 = d1(as_form(n, u));
    const PolyForm dv0 = d0(as_form(n, v)), dv1 = d1(as_form(n, v));
    const PolyForm diff = wedge(du0, dv1) - wedge(du1, dv0);
    return PolyField::constant(n, ComplexRational(Rational(1, 2))) * diff;
}

/// gamma(u, v) on the grid: w^{ij} (i < j) coefficients per interior node,
/// built from centered first differences.
struct GammaCoeffs {
    GridPtr grid;
    std::vector<std::array<int, 2>> pairs;
    std::vector<std::complex<double>> values;  // node-major over interior_nodes()

    std::complex<double> at(std::size_t ordinal, int pair) const {
        return values[ordinal * pairs.size() + static_cast<std::size_t>(pair)];
    }
};

namespace detail {

inline void gamma_at_node(const StencilAlgebra& alg, const GridField& u, const GridField& v, std::size_t i,
                          std::span<double> gu, std::span<double> gv, std::span<std::complex<double>> out) {
    const int d = u.grid().dim();
    for (int a = 0; a < d; ++a) {
        gu[static_cast<std::size_t>(a)] = node_gradient(u, i, a);
        gv[static_cast<std::size_t>(a)] = node_gradient(v, i, a);
    }
    const int rows = 2 * u.grid().n();
    std::array<std::complex<double>, 8> nu{}, nv{};  // [k*2 + alpha]
    for (int k = 0; k < rows; ++k)
        for (int alpha = 0; alpha < 2; ++alpha) {
            nu[static_cast<std::size_t>(2 * k + alpha)] = alg.nabla(k, alpha, gu);
            nv[static_cast<std::size_t>(2 * k + alpha)] = alg.nabla(k, alpha, gv);
        }
    auto g = [&](int p, int q) {
        return 0.5 * (nu[static_cast<std::size_t>(2 * p)] * nv[static_cast<std::size_t>(2 * q + 1)] -
                      nu[static_cast<std::size_t>(2 * p + 1)] * nv[static_cast<std::size_t>(2 * q)]);
    };
    for (std::size_t p = 0; p < alg.pairs().size(); ++p) {
        const auto [a, b] = alg.pairs()[p];
        out[p] = g(a, b) - g(b, a);
    }
}

} // namespace detail

inline GammaCoeffs gamma_form(const GridField& u, const GridField& v) {
    u.check_same_grid(v);
    const Grid& g = u.grid();
    const StencilAlgebra& alg = StencilAlgebra::get(g.n());
    const auto np = static_cast<std::size_t>(alg.num_pairs());
    const auto& nodes = g.interior_nodes();
    GammaCoeffs out{u.grid_ptr(), alg.pairs(), std::vector<std::complex<double>>(nodes.size() * np)};
    parallel_chunks(nodes.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> gu(static_cast<std::size_t>(g.dim())), gv(gu.size());
        for (std::size_t k = b; k < e; ++k)
            detail::gamma_at_node(alg, u, v, nodes[k], gu, gv,
                                  std::span<std::complex<double>>(out.values.data() + k * np, np));
    });
    return out;
}

/// Real part of the top coefficient of gamma(u, v) ^ Delta w_1 ^ ... ^ Delta w_{n-1}
/// per node (full-grid layout, zero off the interior).
inline std::vector<double> gamma_density(const GridField& u, const GridField& v,
                                         std::span<const GridField* const> T = {}) {
    u.check_same_grid(v);
    const Grid& g = u.grid();
    const int n = g.n();
    require(static_cast<int>(T.size()) == n - 1, "gamma_density: T needs n-1 factors");
    for (const auto* w : T) u.check_same_grid(*w);
    const StencilAlgebra& alg = StencilAlgebra::get(n);
    const auto np = static_cast<std::size_t>(alg.num_pairs());
    const auto d = static_cast<std::size_t>(g.dim());
    const auto& nodes = g.interior_nodes();
    std::vector<double> out(g.size(), 0.0);
    parallel_chunks(nodes.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> gu(d), gv(d), hess(d * d);
        std::vector<std::complex<double>> forms(static_cast<std::size_t>(n) * np);
        std::vector<const std::complex<double>*> ptrs(static_cast<std::size_t>(n));
        for (std::size_t k = b; k < e; ++k) {
            const std::size_t i = nodes[k];
            detail::gamma_at_node(alg, u, v, i, gu, gv, std::span<std::complex<double>>(forms.data(), np));
            ptrs[0] = forms.data();
            for (std::size_t t = 0; t < T.size(); ++t) {
                node_hessian(*T[t], i, hess);
                auto* f = forms.data() + (t + 1) * np;
                alg.baston(hess, std::span<std::complex<double>>(f, np));
                for (std::size_t p = 0; p < np; ++p) f[p] *= 2.0;
                ptrs[t + 1] = f;
            }
            out[i] = alg.top(ptrs).real();
        }
    });
    return out;
}

/// Integral of gamma(u, v) ^ T against Lebesgue measure.
inline double gamma_integral(const GridField& u, const GridField& v, std::span<const GridField* const> T = {}) {
    return integrate_volume(gamma_density(u, v, T), u.grid());
}

// ---------------------------------------------------------------- energies

struct EnergyRecord {
    double p = 1.0;
    double value = 0.0;
    std::map<std::string, double> components;

    nlohmann::json to_json() const { return {{"p", p}, {"value", value}, {"components", components}}; }
};

namespace detail {

inline void require_nonpositive(const GridField& u, const char* who) {
    const double tol = 1e-9 * std::max(1.0, u.sup_norm());
    if (u.max_value() > tol) throw DomainError(std::string(who) + ": field must be <= 0");
}

inline std::vector<const GridField*> repeat(const GridField& u) {
    return std::vector<const GridField*>(static_cast<std::size_t>(u.grid().n()), &u);
}

} // namespace detail

/// Integral of (-phi0)^p against a given measure.
inline double weighted_energy(const GridField& phi0, double p, const MeasureDensity& mu) {
    require(p >= 1.0, "energy: p must be >= 1");
    detail::require_nonpositive(phi0, "energy");
    std::vector<double> w(phi0.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::pow(std::max(-phi0[i], 0.0), p);
    return integrate(w, mu);
}

/// E_p(u) = int (-u)^p (Delta u)^n, or the mutual energy
/// E_p(u, w_1, ..., w_n) = int (-u)^p Delta w_1 ^ ... ^ Delta w_n when weights are given.
inline EnergyRecord energy_p(const GridField& u, double p, std::span<const GridField* const> weights = {}) {
    require(p >= 1.0, "energy_p: p must be >= 1");
    detail::require_nonpositive(u, "energy_p");
    const MeasureDensity mu = weights.empty() ? ma_density(u) : ma_density(weights);
    EnergyRecord r;
    r.p = p;
    r.value = weighted_energy(u, p, mu);
    r.components["mass"] = mu.total_mass();
    r.components["min"] = u.min_value();
    r.components["flagged_nodes"] = static_cast<double>(mu.flagged);
    return r;
}

inline double energy(const GridField& u) { return energy_p(u, 1.0).value; }

/// F_mu(u) = E(u) / (n + 1) + int u dmu.
inline double functional_F(const GridField& u, const MeasureDensity& mu) {
    require(u.grid().same_as(*mu.grid), "functional_F: field and measure on different grids");
    return energy(u) / (u.grid().n() + 1) + integrate(u, mu);
}

// ---------------------------------------------------------------- margins

/// Tolerance rel * scale + band_c * h * scale, scale = max(|lhs|, |rhs|).
/// band_c = 0 gives the tight mode.
inline constexpr double kDefaultBand = 1e-3;

struct TolerancePolicy {
    double rel = 1e-9;
    double band_c = kDefaultBand;

    static TolerancePolicy tight() { return {1e-9, 0.0}; }

    double of(double scale, double h) const { return (rel + band_c * h) * scale; }
};

struct InequalityMargin {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    double tol = 0.0;
    bool passed = true;
    std::map<std::string, double> extra;

    nlohmann::json to_json() const {
        nlohmann::json j{{"name", name}, {"lhs", lhs},     {"rhs", rhs},
                         {"margin", margin}, {"tol", tol}, {"passed", passed}};
        if (!extra.empty()) j["extra"] = extra;
        return j;
    }
};

inline InequalityMargin make_margin(std::string name, double lhs, double rhs, double h, const TolerancePolicy& pol,
                                    double scale = -1.0) {
    InequalityMargin m;
    m.name = std::move(name);
    m.lhs = lhs;
    m.rhs = rhs;
    m.margin = rhs - lhs;
    if (scale < 0.0) scale = std::max(std::abs(lhs), std::abs(rhs));
    m.tol = pol.of(scale, h);
    m.passed = std::isfinite(m.margin) && m.margin >= -m.tol;
    return m;
}

inline bool all_passed(const std::vector<InequalityMargin>& ms) {
    for (const auto& m : ms)
        if (!m.passed) return false;
    return true;
}

// ---------------------------------------------------------------- constants

/// alpha(n, p) = (p + 2) ((p + 1) / p)^{n-1} - (p + 1).
inline double alpha_np(int n, double p) { return (p + 2.0) * std::pow((p + 1.0) / p, n - 1) - (p + 1.0); }

/// The printed exponent "p alpha / p - 1" admits two readings.
enum class DpParse {
    Grouped,  // p^{p alpha / (p - 1)}
    Literal,  // p^{(p alpha / p) - 1} = p^{alpha - 1}
};

inline double D_p(int n, double p, DpParse parse) {
    require(p >= 1.0, "D_p: p must be >= 1");
    if (p == 1.0) return 1.0;
    const double a = alpha_np(n, p);
    return parse == DpParse::Grouped ? std::pow(p, p * a / (p - 1.0)) : std::pow(p, a - 1.0);
}

/// C_1 = 1, C_p = p^{p / (p - 1)}.
inline double C_p(double p) { return p == 1.0 ? 1.0 : std::pow(p, p / (p - 1.0)); }

inline const char* to_string(DpParse p) { return p == DpParse::Grouped ? "grouped" : "literal"; }

// ---------------------------------------------------------------- verifiers

namespace detail {

inline std::vector<const GridField*> concat(std::initializer_list<const GridField*> head,
                                            std::span<const GridField* const> tail) {
    std::vector<const GridField*> out(head);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

inline double h_of(const GridField& u) { return u.grid().h_max(); }

// int (-a)^p Delta b ^ T
inline double mixed_energy(const GridField& a, const GridField& b, std::span<const GridField* const> T, double p) {
    const auto args = concat({&b}, T);
    return weighted_energy(a, p, ma_density(args));
}

} // namespace detail

/// int gamma(u, v) ^ T <= (int gamma(u, u) ^ T)^{1/2} (int gamma(v, v) ^ T)^{1/2}.
inline InequalityMargin check_cauchy_schwarz(const GridField& u, const GridField& v,
                                             std::span<const GridField* const> T = {},
                                             const TolerancePolicy& pol = {}) {
    const double uv = gamma_integral(u, v, T);
    const double uu = gamma_integral(u, u, T);
    const double vv = gamma_integral(v, v, T);
    auto m = make_margin("cauchy-schwarz", uv, std::sqrt(std::max(uu, 0.0) * std::max(vv, 0.0)), detail::h_of(u), pol);
    m.extra = {{"gamma_uu", uu}, {"gamma_vv", vv}};
    return m;
}

/// E_p(u, v_1..v_n) <= D_p E_p(u)^{p/(n+p)} prod E_p(v_i)^{1/(n+p)}.
inline InequalityMargin check_energy_estimate(const GridField& u, std::span<const GridField* const> vs, double p,
                                              DpParse parse = DpParse::Literal, const TolerancePolicy& pol = {}) {
    require(p >= 1.0, "check_energy_estimate: p must be >= 1");
    const int n = u.grid().n();
    require(static_cast<int>(vs.size()) == n, "check_energy_estimate: need n fields v");
    const double lhs = energy_p(u, p, vs).value;
    const double Eu = energy_p(u, p).value;
    double rhs = D_p(n, p, parse) * std::pow(Eu, p / (n + p));
    for (const auto* v : vs) rhs *= std::pow(energy_p(*v, p).value, 1.0 / (n + p));
    auto m = make_margin("energy-estimate", lhs, rhs, detail::h_of(u), pol);
    m.extra = {{"p", p}, {"D_p", D_p(n, p, parse)}, {"E_p(u)", Eu}};
    return m;
}

/// The Hoelder chain with T = Delta v^1 ^ ... ^ Delta v^{n-1} and E(a, b) = int (-a)^p Delta b ^ T:
///   E(u, v) <= C_p E(u, u)^{p/(p+1)} E(v, v)^{1/(p+1)}
///   E(u, v) <= p E(u, u)^{(p-1)/p} E(v, u)^{1/p}
///   E(v, u) <= p E(v, v)^{(p-1)/p} E(u, v)^{1/p}
inline std::vector<InequalityMargin> check_holder_step(const GridField& u, const GridField& v,
                                                       std::span<const GridField* const> T, double p,
                                                       const TolerancePolicy& pol = {}) {
    require(p >= 1.0, "check_holder_step: p must be >= 1");
    require(static_cast<int>(T.size()) == u.grid().n() - 1, "check_holder_step: T needs n-1 factors");
    const double Euv = detail::mixed_energy(u, v, T, p);
    const double Euu = detail::mixed_energy(u, u, T, p);
    const double Evv = detail::mixed_energy(v, v, T, p);
    const double Evu = detail::mixed_energy(v, u, T, p);
    const double h = detail::h_of(u);
    std::vector<InequalityMargin> out;
    out.push_back(make_margin("holder", Euv, C_p(p) * std::pow(Euu, p / (p + 1)) * std::pow(Evv, 1.0 / (p + 1)), h, pol));
    out.push_back(make_margin("holder-u", Euv, p * std::pow(Euu, (p - 1) / p) * std::pow(Evu, 1.0 / p), h, pol));
    out.push_back(make_margin("holder-v", Evu, p * std::pow(Evv, (p - 1) / p) * std::pow(Euv, 1.0 / p), h, pol));
    return out;
}

/// Comparison principle: int_{u<v} (Delta v)^n <= int_{u<v} (Delta u)^n given
/// trace(u) >= trace(v), and int_{u>v} (Delta u)^n <= int_{u>v} (Delta v)^n.
inline std::vector<InequalityMargin> check_comparison(const GridField& u, const GridField& v,
                                                      const TolerancePolicy& pol = {}) {
    u.check_same_grid(v);
    const Grid& g = u.grid();
    const double trace_tol = 1e-9 * std::max({1.0, u.sup_norm(), v.sup_norm()});
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!g.interior(i) && u[i] < v[i] - trace_tol)
            throw DomainError("check_comparison: boundary condition trace(u) >= trace(v) violated");
    const auto mu = ma_density(u), mv = ma_density(v);
    auto less = [&](std::size_t i) { return u[i] < v[i]; };
    auto more = [&](std::size_t i) { return u[i] > v[i]; };
    std::vector<InequalityMargin> out;
    const double scale = std::max(mu.total_mass(), mv.total_mass());
    out.push_back(make_margin("comparison", mass_where(mv, less), mass_where(mu, less), g.h_max(), pol, scale));
    out.push_back(make_margin("comparison-sup", mass_where(mu, more), mass_where(mv, more), g.h_max(), pol, scale));
    return out;
}

/// Nodes at least `k` steps away from every box face (and core).
inline bool away_from_faces(const Grid& g, std::size_t i, int k) {
    if (!g.core(i)) return false;
    for (int a = 0; a < g.dim(); ++a) {
        const int idx = g.axis_index(i, a);
        if (idx < k || idx > g.m() - 1 - k) return false;
    }
    return true;
}

/// Kink band {|u - v| <= c h ||grad(u - v)||_1}, with centered differences.
inline std::vector<std::uint8_t> kink_band(const GridField& u, const GridField& v, double c) {
    const Grid& g = u.grid();
    std::vector<std::uint8_t> band(g.size(), 0);
    for (std::uint32_t i : g.interior_nodes()) {
        double grad = 0.0;
        for (int a = 0; a < g.dim(); ++a) grad += std::abs(node_gradient(u, i, a) - node_gradient(v, i, a)) * g.h(a);
        band[i] = std::abs(u[i] - v[i]) <= c * grad ? 1 : 0;
    }
    return band;
}

struct DemaillyOptions {
    double mollifier = 2.0;  // width in units of h
    double band = 3.0;       // kink band factor: mollifier reach plus one stencil step
};

/// (Delta max{u,v})^n >= chi_{u>=v} (Delta u)^n + chi_{u<v} (Delta v)^n, with
/// max mollified at width 2h. Node-wise off the kink band, and in aggregate
/// over all nodes out of the mollifier's reach of the box.
inline std::vector<InequalityMargin> check_demailly(const GridField& u, const GridField& v,
                                                    const DemaillyOptions& opt = {}, const TolerancePolicy& pol = {}) {
    u.check_same_grid(v);
    const Grid& g = u.grid();
    const double h = g.h_max();
    const GridField M = mollify(pointwise_max(u, v), opt.mollifier * h);
    const auto lhs = ma_values(std::span<const GridField* const>(detail::repeat(M)));
    const auto du = ma_values(std::span<const GridField* const>(detail::repeat(u)));
    const auto dv = ma_values(std::span<const GridField* const>(detail::repeat(v)));
    const auto band = kink_band(u, v, opt.band);
    const int reach = static_cast<int>(std::ceil(opt.mollifier)) + 1;
    double worst = std::numeric_limits<double>::infinity(), worst_l = 0.0, worst_r = 0.0, worst_tol = 0.0;
    CompensatedSum L, R;
    std::size_t tested = 0;
    for (std::uint32_t i : g.interior_nodes()) {
        if (!away_from_faces(g, i, reach)) continue;
        const double l = std::max(lhs.value[i], 0.0);
        const double r = std::max(u[i] >= v[i] ? du.value[i] : dv.value[i], 0.0);
        L.add(l);
        R.add(r);
        if (band[i]) continue;
        ++tested;
        const double scale = std::max({lhs.scale[i], du.scale[i], dv.scale[i], 1e-300});
        const double tol = pol.of(std::pow(scale, g.n()), h);
        if (l - r + tol < worst) {
            worst = l - r + tol;
            worst_l = l;
            worst_r = r;
            worst_tol = tol;
        }
    }
    std::vector<InequalityMargin> out;
    InequalityMargin node;
    node.name = "demailly-nodewise";
    if (tested > 0) {
        node.lhs = worst_r;
        node.rhs = worst_l;
        node.margin = worst_l - worst_r;
        node.tol = worst_tol;
        node.passed = node.margin >= -node.tol;
    }
    node.extra = {{"tested_nodes", static_cast<double>(tested)}};
    out.push_back(node);
    const double cv = g.cell_volume();
    out.push_back(make_margin("demailly-aggregate", R.value() * cv, L.value() * cv, h, pol));
    return out;
}

/// Delta max(u, v) ^ T = Delta u ^ T on {u > v}: sup-node difference of the
/// densities over core nodes whose whole stencil lies in {u > v}, compared with zero.
inline InequalityMargin check_locality(const GridField& u, const GridField& v,
                                       std::span<const GridField* const> T = {}, const TolerancePolicy& pol = {}) {
    u.check_same_grid(v);
    const Grid& g = u.grid();
    const GridField M = pointwise_max(u, v);
    const auto lhs = ma_values(std::span<const GridField* const>(detail::concat({&M}, T)));
    const auto rhs = ma_values(std::span<const GridField* const>(detail::concat({&u}, T)));
    auto above = [&](std::size_t j) { return u[j] > v[j]; };
    double diff = 0.0, scale = 0.0;
    std::size_t tested = 0;
    for (std::uint32_t i : g.interior_nodes()) {
        if (!g.core(i) || !above(i) || !g.stencil_all(i, above)) continue;
        ++tested;
        diff = std::max(diff, std::abs(lhs.value[i] - rhs.value[i]));
        scale = std::max(scale, std::pow(std::max(lhs.scale[i], rhs.scale[i]), g.n()));
    }
    auto m = make_margin("locality", diff, 0.0, g.h_max(), pol, scale);
    m.extra = {{"tested_nodes", static_cast<double>(tested)}};
    return m;
}

/// Blocki-type bound for u <= h with trace(h - u) = 0 and v_i <= 0:
///   int (h-u)^n Delta v_1 ^ ... ^ Delta v_n <= n! |v_1| ... |v_{n-1}| int |v_n| (Delta u)^n
/// and the inductive steps, p = 2..n,
///   int (h-u)^p (Delta u)^{n-p} ^ Delta v_{n-p+1} ^ ... ^ Delta v_n
///     <= p |v_{n-p+1}| int (h-u)^{p-1} (Delta u)^{n-p+1} ^ Delta v_{n-p+2} ^ ... ^ Delta v_n,
/// with |v| the sup-node norm.
inline std::vector<InequalityMargin> check_blocki(const GridField& u, const GridField& hf,
                                                  std::span<const GridField* const> vs,
                                                  const TolerancePolicy& pol = {}) {
    const Grid& g = u.grid();
    const int n = g.n();
    u.check_same_grid(hf);
    require(static_cast<int>(vs.size()) == n, "check_blocki: need n fields v");
    const double scale_u = std::max({1.0, u.sup_norm(), hf.sup_norm()});
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (u[i] > hf[i] + 1e-9 * scale_u) throw DomainError("check_blocki: requires u <= h");
        if (!g.interior(i) && std::abs(hf[i] - u[i]) > 1e-9 * scale_u)
            throw DomainError("check_blocki: requires trace(h - u) = 0");
    }
    for (const auto* v : vs) {
        u.check_same_grid(*v);
        if (v->max_value() > 1e-9 * std::max(1.0, v->sup_norm())) throw DomainError("check_blocki: requires v_i <= 0");
    }
    std::vector<double> gap(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gap[i] = std::max(hf[i] - u[i], 0.0);
    auto power = [&](int p) {
        std::vector<double> w(gap.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::pow(gap[i], p);
        return w;
    };
    // (Delta u)^{k} ^ Delta v_{j} ^ ... ^ Delta v_n
    auto measure = [&](int k, int first_v) {
        std::vector<const GridField*> args(static_cast<std::size_t>(k), &u);
        for (int j = first_v; j < n; ++j) args.push_back(vs[static_cast<std::size_t>(j)]);
        return ma_density(std::span<const GridField* const>(args));
    };
    const double h = g.h_max();
    std::vector<InequalityMargin> out;
    double factorial = 1.0, norms = 1.0;
    for (int k = 2; k <= n; ++k) factorial *= k;
    for (int k = 0; k + 1 < n; ++k) norms *= vs[static_cast<std::size_t>(k)]->sup_norm();
    const double lhs = integrate(power(n), measure(0, 0));
    std::vector<double> absv(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) absv[i] = std::abs((*vs[static_cast<std::size_t>(n - 1)])[i]);
    out.push_back(make_margin("blocki", lhs, factorial * norms * integrate(absv, measure(n, n)), h, pol));
    for (int p = 2; p <= n; ++p) {
        const double l = integrate(power(p), measure(n - p, n - p));
        const double r = p * vs[static_cast<std::size_t>(n - p)]->sup_norm() * integrate(power(p - 1), measure(n - p + 1, n - p + 1));
        out.push_back(make_margin("blocki-step-" + std::to_string(p), l, r, h, pol));
    }
    if (n == 1) {
        // the base step: int (h-u) Delta v <= int |v| Delta u
        out.push_back(make_margin("blocki-step-1", lhs, integrate(absv, measure(1, 1)), h, pol));
    }
    return out;
}

/// int_U (Delta phi)^n <= D_p C_n(U)^{p/(p+n)} E_p(phi)^{n/(p+n)}, with
/// C_n(U) the total Monge-Ampere mass of the relative extremal function of U.
inline InequalityMargin capacity_estimate(const std::optional<Region>& U, const GridField& phi, double p,
                                          DpParse parse = DpParse::Literal, const TolerancePolicy& pol = {},
                                          const EnvelopeOptions& env = {}) {
    const Grid& g = phi.grid();
    const int n = g.n();
    bool empty = !U || U->empty();
    std::vector<double> x(static_cast<std::size_t>(g.dim()));
    std::vector<std::uint8_t> in_u(g.size(), 0);
    if (!empty) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.coords(i, x);
            in_u[i] = U->contains(x) ? 1 : 0;
            count += in_u[i];
        }
        empty = count == 0;
    }
    if (empty) {
        auto m = make_margin("capacity", 0.0, 0.0, g.h_max(), pol);
        m.extra = {{"capacity", 0.0}};
        return m;
    }
    const auto ext = extremal_function(phi.grid_ptr(), *U, env).u;
    const double cap = ma_density(ext).total_mass();
    const auto mu = ma_density(phi);
    const double lhs = mass_where(mu, [&](std::size_t i) { return in_u[i] != 0; });
    const double Ep = energy_p(phi, p).value;
    const double rhs = D_p(n, p, parse) * std::pow(cap, p / (p + n)) * std::pow(Ep, n / (p + n));
    auto m = make_margin("capacity", lhs, rhs, g.h_max(), pol);
    m.extra = {{"capacity", cap}, {"E_p", Ep}, {"D_p", D_p(n, p, parse)}};
    return m;
}

/// u <= v  =>  int (Delta u)^n >= int (Delta v)^n.
inline InequalityMargin check_mass_monotonicity(const GridField& u, const GridField& v, const TolerancePolicy& pol = {}) {
    return make_margin("mass-monotonicity", ma_density(v).total_mass(), ma_density(u).total_mass(), u.grid().h_max(), pol);
}

/// u <= v  =>  E(v) <= E(u).
inline InequalityMargin check_energy_monotonicity(const GridField& u, const GridField& v,
                                                  const TolerancePolicy& pol = {}) {
    return make_margin("energy-monotonicity", energy(v), energy(u), u.grid().h_max(), pol);
}

/// E(u + v)^{1/(n+1)} <= E(u)^{1/(n+1)} + E(v)^{1/(n+1)}.
inline InequalityMargin check_energy_convexity(const GridField& u, const GridField& v, const TolerancePolicy& pol = {}) {
    const double k = 1.0 / (u.grid().n() + 1);
    return make_margin("energy-convexity", std::pow(energy(u + v), k), std::pow(energy(u), k) + std::pow(energy(v), k),
                       u.grid().h_max(), pol);
}

/// |int u Delta v ^ T - int v Delta u ^ T| compared with zero; the gamma
/// form of the same integral is reported alongside.
inline InequalityMargin check_integration_by_parts(const GridField& u, const GridField& v,
                                                   std::span<const GridField* const> T = {},
                                                   const TolerancePolicy& pol = {}) {
    const double a = integrate(u, ma_density(std::span<const GridField* const>(detail::concat({&v}, T))));
    const double b = integrate(v, ma_density(std::span<const GridField* const>(detail::concat({&u}, T))));
    auto m = make_margin("integration-by-parts", std::abs(a - b), 0.0, u.grid().h_max(), pol,
                         std::max(std::abs(a), std::abs(b)));
    m.extra = {{"int_u_dv", a}, {"int_v_du", b}, {"minus_gamma", -gamma_integral(u, v, T)}};
    return m;
}

/// int Delta u_1 ^ ... ^ Delta u_n <= prod (int (Delta u_i)^n)^{1/n}.
inline InequalityMargin check_mass_holder(std::span<const GridField* const> us, const TolerancePolicy& pol = {}) {
    require(!us.empty(), "check_mass_holder: no fields");
    const int n = us[0]->grid().n();
    require(static_cast<int>(us.size()) == n, "check_mass_holder: need n fields");
    const double lhs = ma_density(us).total_mass();
    double rhs = 1.0;
    for (const auto* u : us) rhs *= std::pow(ma_density(*u).total_mass(), 1.0 / n);
    return make_margin("mass-holder", lhs, rhs, us[0]->grid().h_max(), pol);
}

// ---------------------------------------------------------------- diagnostics

struct ClassDiagnostics {
    double trace_sup = 0.0;
    double total_mass = 0.0;
    std::map<double, double> energies;  // p -> E_p
    PshReport psh;

    nlohmann::json to_json() const {
        nlohmann::json e = nlohmann::json::object();
        for (const auto& [p, v] : energies) {
            std::ostringstream key;
            key << p;
            e[key.str()] = v;
        }
        return {{"trace_sup", trace_sup}, {"total_mass", total_mass}, {"energies", e}, {"psh", psh.to_json()}};
    }
};

/// Proxies for the finite-energy classes: boundary trace, Monge-Ampere mass,
/// and E_p for the requested exponents. Membership is not decided.
inline ClassDiagnostics class_diagnostics(const GridField& u, std::span<const double> ps = {}) {
    ClassDiagnostics d;
    d.psh = psh_test(u);
    d.trace_sup = u.trace_sup_norm();
    const auto mu = ma_density(u);
    d.total_mass = mu.total_mass();
    if (!ps.empty()) {
        detail::require_nonpositive(u, "class_diagnostics");
        for (double p : ps) d.energies[p] = weighted_energy(u, p, mu);
    }
    return d;
}

} // namespace qma
