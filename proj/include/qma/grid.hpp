#pragma once

// Finite-difference realization of the calculus on box grids in R^{4n}.
// Nodes are stored row-major (last axis fastest). Interior nodes are those
// off the box faces and inside the optional domain; every other node holds
// the Dirichlet trace.

#include "qma/error.hpp"
#include "qma/geometry.hpp"
#include "qma/parallel.hpp"
#include "qma/poly.hpp"
#include "qma/qform.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace qma {

class Grid {
public:
    Grid(int n, int m, std::vector<double> lo, std::vector<double> hi, std::optional<Region> domain = std::nullopt)
        : n_(n), dim_(4 * n), m_(m), lo_(std::move(lo)), hi_(std::move(hi)), domain_(std::move(domain)) {
        require(n == 1 || n == 2, "Grid: n must be 1 or 2");
        require(m >= 5 && m % 2 == 1, "Grid: points per axis must be odd and >= 5");
        require(static_cast<int>(lo_.size()) == dim_ && static_cast<int>(hi_.size()) == dim_,
                "Grid: box must have one [lo, hi] pair per axis");
        double total = 1.0;
        for (int a = 0; a < dim_; ++a) {
            require(hi_[idx(a)] > lo_[idx(a)], "Grid: empty box axis");
            total *= m;
        }
        require(total < 2.0e9, "Grid: too many nodes");
        size_ = static_cast<std::size_t>(total);
        h_.resize(idx(dim_));
        stride_.resize(idx(dim_));
        for (int a = 0; a < dim_; ++a) h_[idx(a)] = (hi_[idx(a)] - lo_[idx(a)]) / (m - 1);
        std::size_t s = 1;
        for (int a = dim_ - 1; a >= 0; --a) {
            stride_[idx(a)] = s;
            s *= static_cast<std::size_t>(m);
        }
        interior_mask_.assign(size_, 0);
        std::vector<double> x(idx(dim_));
        for (std::size_t i = 0; i < size_; ++i) {
            if (on_box_face(i)) continue;
            if (domain_) {
                coords(i, x);
                if (!domain_->contains(x)) continue;
            }
            interior_mask_[i] = 1;
            interior_.push_back(static_cast<std::uint32_t>(i));
        }
        core_mask_ = interior_mask_;
        if (domain_) {
            std::vector<double> y(idx(dim_));
            auto inside = [&](std::size_t j) {
                coords(j, y);
                return domain_->contains(y);
            };
            for (std::uint32_t i : interior_) {
                const bool ok = stencil_all(i, inside);
                core_mask_[i] = ok ? 1 : 0;
            }
        }
    }

    static std::shared_ptr<const Grid> cube(int n, int m, double lo, double hi,
                                            std::optional<Region> domain = std::nullopt) {
        const auto d = static_cast<std::size_t>(4 * n);
        return std::make_shared<const Grid>(n, m, std::vector<double>(d, lo), std::vector<double>(d, hi),
                                            std::move(domain));
    }

    int n() const { return n_; }
    int dim() const { return dim_; }
    int m() const { return m_; }
    std::size_t size() const { return size_; }
    double h(int a) const { return h_[idx(a)]; }
    double h_max() const { return *std::max_element(h_.begin(), h_.end()); }
    double lo(int a) const { return lo_[idx(a)]; }
    double hi(int a) const { return hi_[idx(a)]; }
    std::size_t stride(int a) const { return stride_[idx(a)]; }
    const std::optional<Region>& domain() const { return domain_; }

    int axis_index(std::size_t flat, int a) const {
        return static_cast<int>((flat / stride_[idx(a)]) % static_cast<std::size_t>(m_));
    }

    double coord(std::size_t flat, int a) const { return lo_[idx(a)] + axis_index(flat, a) * h_[idx(a)]; }

    void coords(std::size_t flat, std::span<double> out) const {
        for (int a = 0; a < dim_; ++a) out[idx(a)] = coord(flat, a);
    }

    std::vector<double> coords(std::size_t flat) const {
        std::vector<double> x(idx(dim_));
        coords(flat, x);
        return x;
    }

    bool on_box_face(std::size_t flat) const {
        for (int a = 0; a < dim_; ++a) {
            const int k = axis_index(flat, a);
            if (k == 0 || k == m_ - 1) return true;
        }
        return false;
    }

    bool interior(std::size_t flat) const { return interior_mask_[flat] != 0; }
    /// Interior node whose second-difference stencil stays inside the closed domain.
    bool core(std::size_t flat) const { return core_mask_[flat] != 0; }

    /// pred holds at i +- s_a and i +- s_a +- s_b for all axes a < b.
    /// Requires an interior node.
    template <class Pred>
    bool stencil_all(std::size_t i, Pred&& pred) const {
        for (int a = 0; a < dim_; ++a) {
            const std::size_t sa = stride(a);
            if (!pred(i + sa) || !pred(i - sa)) return false;
            for (int b = a + 1; b < dim_; ++b) {
                const std::size_t sb = stride(b);
                if (!pred(i + sa + sb) || !pred(i + sa - sb) || !pred(i - sa + sb) || !pred(i - sa - sb)) return false;
            }
        }
        return true;
    }
    const std::vector<std::uint32_t>& interior_nodes() const { return interior_; }
    std::size_t center() const {
        std::size_t c = 0;
        for (int a = 0; a < dim_; ++a) c += stride_[idx(a)] * static_cast<std::size_t>(m_ / 2);
        return c;
    }

    double cell_volume() const {
        double v = 1.0;
        for (double hv : h_) v *= hv;
        return v;
    }

    bool same_as(const Grid& o) const {
        if (this == &o) return true;
        if (n_ != o.n_ || m_ != o.m_ || lo_ != o.lo_ || hi_ != o.hi_) return false;
        if (domain_.has_value() != o.domain_.has_value()) return false;
        return !domain_ || domain_->to_json() == o.domain_->to_json();
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"n", n_}, {"m", m_}, {"lo", lo_}, {"hi", hi_}};
        if (domain_) j["domain"] = domain_->to_json();
        return j;
    }

private:
    static std::size_t idx(int a) { return static_cast<std::size_t>(a); }

    int n_;
    int dim_;
    int m_;
    std::vector<double> lo_, hi_, h_;
    std::vector<std::size_t> stride_;
    std::size_t size_ = 0;
    std::optional<Region> domain_;
    std::vector<std::uint8_t> interior_mask_;
    std::vector<std::uint8_t> core_mask_;
    std::vector<std::uint32_t> interior_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Real samples on every node of a grid.
class GridField {
public:
    GridField() = default;
    explicit GridField(GridPtr g, double value = 0.0) : grid_(std::move(g)), values_(grid_->size(), value) {}
    GridField(GridPtr g, std::vector<double> values) : grid_(std::move(g)), values_(std::move(values)) {
        require(values_.size() == grid_->size(), "GridField: value count does not match grid");
    }

    /// f(x) evaluated at every node.
    template <typename F>
    static GridField sample(GridPtr g, F&& f) {
        GridField out(g);
        const Grid& gr = *g;
        parallel_chunks(gr.size(), [&](std::size_t b, std::size_t e) {
            std::vector<double> x(static_cast<std::size_t>(gr.dim()));
            for (std::size_t i = b; i < e; ++i) {
                gr.coords(i, x);
                out.values_[i] = f(std::span<const double>(x));
            }
        });
        return out;
    }

    static GridField from_poly(GridPtr g, const PolyField& p) {
        require(p.n() == g->n(), "GridField::from_poly: dimension mismatch");
        struct Term {
            std::vector<int> vars;
            double c;
        };
        std::vector<Term> terms;
        for (const auto& [mono, c] : p.terms()) {
            Term t{{}, c.re.get_d()};
            for (int v = 0; v < 4 * p.n(); ++v)
                for (int e = 0; e < mono.exponent(v); ++e) t.vars.push_back(v);
            terms.push_back(std::move(t));
        }
        return sample(g, [&](std::span<const double> x) {
            double acc = 0.0;
            for (const auto& t : terms) {
                double v = t.c;
                for (int var : t.vars) v *= x[static_cast<std::size_t>(var)];
                acc += v;
            }
            return acc;
        });
    }

    const Grid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    void check_same_grid(const GridField& o) const {
        require(grid_ && o.grid_ && grid_->same_as(*o.grid_), "GridField: fields live on different grids");
    }

    GridField& operator+=(const GridField& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    GridField& operator-=(const GridField& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    GridField& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }
    GridField& operator+=(double s) {
        for (double& v : values_) v += s;
        return *this;
    }
    friend GridField operator+(GridField a, const GridField& b) { return a += b; }
    friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
    friend GridField operator*(double s, GridField a) { return a *= s; }
    friend GridField operator+(GridField a, double s) { return a += s; }
    friend GridField operator-(GridField a) { return a *= -1.0; }

    double max_value() const { return *std::max_element(values_.begin(), values_.end()); }
    double min_value() const { return *std::min_element(values_.begin(), values_.end()); }

    double sup_norm() const {
        double s = 0.0;
        for (double v : values_) s = std::max(s, std::abs(v));
        return s;
    }

    /// Largest |value| over non-interior (trace-carrying) nodes.
    double trace_sup_norm() const {
        double s = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!grid_->interior(i)) s = std::max(s, std::abs(values_[i]));
        return s;
    }

    bool finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

inline GridField pointwise_max(const GridField& a, const GridField& b) {
    a.check_same_grid(b);
    GridField out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a[i], b[i]);
    return out;
}

inline GridField pointwise_min(const GridField& a, const GridField& b) {
    a.check_same_grid(b);
    GridField out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a[i], b[i]);
    return out;
}

inline double sup_distance(const GridField& a, const GridField& b) {
    a.check_same_grid(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
    return s;
}

/// Nonnegative density against Lebesgue measure, zero off the interior.
struct MeasureDensity {
    GridPtr grid;
    std::vector<double> density;
    bool non_psh = false;        // some node fell below -eps_neg
    std::size_t flagged = 0;     // number of such nodes
    double worst_negative = 0.0; // most negative raw value seen
    double max_imag = 0.0;       // largest |imaginary part| of the raw top coefficient

    MeasureDensity() = default;
    MeasureDensity(GridPtr g, std::vector<double> d) : grid(std::move(g)), density(std::move(d)) {
        require(density.size() == grid->size(), "MeasureDensity: size does not match grid");
        for (std::size_t i = 0; i < density.size(); ++i) {
            require(std::isfinite(density[i]) && density[i] >= 0.0, "MeasureDensity: density must be finite and >= 0");
            if (!grid->interior(i)) density[i] = 0.0;
        }
    }

    static MeasureDensity zero(GridPtr g) { return MeasureDensity(g, std::vector<double>(g->size(), 0.0)); }

    static MeasureDensity constant(GridPtr g, double c) {
        return MeasureDensity(g, std::vector<double>(g->size(), c));
    }

    double total_mass() const {
        CompensatedSum s;
        for (std::uint32_t i : grid->interior_nodes()) s.add(density[i]);
        return s.value() * grid->cell_volume();
    }

    double sup() const { return *std::max_element(density.begin(), density.end()); }

    MeasureDensity scaled(double s) const {
        require(s >= 0.0, "MeasureDensity: negative scale");
        MeasureDensity out = *this;
        for (double& d : out.density) d *= s;
        return out;
    }
};

namespace detail {

inline void require_interior_stencil(const Grid& g) {
    require(g.m() >= 5, "grid too small for second-order stencils");
}

} // namespace detail

/// Centered second differences at an interior node: H[a*d+b] = d_a d_b u.
/// Pure second differences use the compact 3-point stencil; mixed ones the
/// 4-point cross stencil. Both are exact on quadratics.
inline void node_hessian(const GridField& u, std::size_t i, std::span<double> hess) {
    const Grid& g = u.grid();
    const int d = g.dim();
    const auto& v = u.values();
    for (int a = 0; a < d; ++a) {
        const std::size_t sa = g.stride(a);
        const double ha = g.h(a);
        hess[static_cast<std::size_t>(a * d + a)] = (v[i + sa] - 2.0 * v[i] + v[i - sa]) / (ha * ha);
        for (int b = a + 1; b < d; ++b) {
            const std::size_t sb = g.stride(b);
            const double val = (v[i + sa + sb] - v[i + sa - sb] - v[i - sa + sb] + v[i - sa - sb]) / (4.0 * ha * g.h(b));
            hess[static_cast<std::size_t>(a * d + b)] = val;
            hess[static_cast<std::size_t>(b * d + a)] = val;
        }
    }
}

/// Centered first difference d_a u at an interior node.
inline double node_gradient(const GridField& u, std::size_t i, int a) {
    const Grid& g = u.grid();
    const std::size_t s = g.stride(a);
    return (u[i + s] - u[i - s]) / (2.0 * g.h(a));
}

/// Precomputed linear maps from the real Hessian / gradient to the complex
/// quantities nabla_{k alpha} u, Delta_{ij} u, and the pairing that extracts
/// the top coefficient of a wedge of n two-forms.
class StencilAlgebra {
public:
    struct Weight {
        int a, b;
        std::complex<double> w;
    };
    struct PairingTerm {
        double sign;
        std::array<int, 2> pair;  // pair ordinal per factor (n <= 2)
    };

    explicit StencilAlgebra(int n) : n_(n), table_(n) {
        const int d = 4 * n;
        for (int i = 0; i < 2 * n; ++i)
            for (int j = i + 1; j < 2 * n; ++j) pairs_.push_back({i, j});
        for (int k = 0; k < 2 * n; ++k)
            for (int alpha = 0; alpha < 2; ++alpha) rows_.push_back(table_.row(k, alpha));
        for (const auto& [i, j] : pairs_) {
            // Delta_ij = 1/2 sum_{a,b} (c_{i0,a} c_{j1,b} - c_{i1,a} c_{j0,b}) d_a d_b u
            std::vector<std::complex<double>> dense(static_cast<std::size_t>(d * d));
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    dense[static_cast<std::size_t>(a * d + b)] =
                        0.5 * (row(i, 0)[ua(a)] * row(j, 1)[ua(b)] - row(i, 1)[ua(a)] * row(j, 0)[ua(b)]);
            std::vector<Weight> ws;
            for (int a = 0; a < d; ++a)
                for (int b = a; b < d; ++b) {
                    std::complex<double> w = dense[static_cast<std::size_t>(a * d + b)];
                    if (b != a) w += dense[static_cast<std::size_t>(b * d + a)];
                    if (std::abs(w) > 0.0) ws.push_back({a, b, w});
                }
            baston_.push_back(std::move(ws));
        }
        for (const auto& term : delta_expansion(n)) {
            bool ordered = true;
            PairingTerm pt{static_cast<double>(term.sign), {0, 0}};
            for (int k = 0; k < n; ++k) {
                const int i = term.seq[ua(2 * k)];
                const int j = term.seq[ua(2 * k + 1)];
                if (i > j) {
                    ordered = false;
                    break;
                }
                pt.pair[ua(k)] = pair_ordinal(i, j);
            }
            if (ordered) pairing_.push_back(pt);
        }
    }

    int n() const { return n_; }
    int num_pairs() const { return static_cast<int>(pairs_.size()); }
    const std::vector<std::array<int, 2>>& pairs() const { return pairs_; }

    int pair_ordinal(int i, int j) const {
        for (std::size_t p = 0; p < pairs_.size(); ++p)
            if (pairs_[p][0] == i && pairs_[p][1] == j) return static_cast<int>(p);
        throw DomainError("StencilAlgebra: not an ordered pair");
    }

    const std::vector<std::complex<double>>& row(int k, int alpha) const { return rows_[ua(2 * k + alpha)]; }

    /// Delta_ij for every ordered pair i < j from a dense real Hessian.
    void baston(std::span<const double> hess, std::span<std::complex<double>> out) const {
        const int d = 4 * n_;
        for (std::size_t p = 0; p < baston_.size(); ++p) {
            std::complex<double> s = 0.0;
            for (const auto& w : baston_[p]) s += w.w * hess[ua(w.a * d + w.b)];
            out[p] = s;
        }
    }

    /// nabla_{k alpha} applied to a real gradient vector.
    std::complex<double> nabla(int k, int alpha, std::span<const double> grad) const {
        std::complex<double> s = 0.0;
        const auto& r = row(k, alpha);
        for (std::size_t a = 0; a < grad.size(); ++a)
            if (r[a] != 0.0) s += r[a] * grad[a];
        return s;
    }

    /// Top coefficient of A_1 ^ ... ^ A_n where A_k holds the w^{ij} (i<j)
    /// coefficients of a two-form.
    std::complex<double> top(std::span<const std::complex<double>* const> forms) const {
        std::complex<double> s = 0.0;
        for (const auto& t : pairing_) {
            std::complex<double> prod = t.sign;
            for (int k = 0; k < n_; ++k) prod *= forms[ua(k)][t.pair[ua(k)]];
            s += prod;
        }
        return s;
    }

    static const StencilAlgebra& get(int n) {
        static const StencilAlgebra one(1);
        static const StencilAlgebra two(2);
        require(n == 1 || n == 2, "StencilAlgebra: n must be 1 or 2");
        return n == 1 ? one : two;
    }

private:
    static std::size_t ua(int a) { return static_cast<std::size_t>(a); }

    int n_;
    NablaTable table_;
    std::vector<std::vector<std::complex<double>>> rows_;
    std::vector<std::array<int, 2>> pairs_;
    std::vector<std::vector<Weight>> baston_;
    std::vector<PairingTerm> pairing_;
};

/// Delta_ij u (i < j) at every interior node, in interior_nodes() order.
struct BastonCoeffs {
    GridPtr grid;
    std::vector<std::array<int, 2>> pairs;
    std::vector<std::complex<double>> values;  // node-major, pairs.size() per node

    std::complex<double> at(std::size_t ordinal, int pair) const {
        return values[ordinal * pairs.size() + static_cast<std::size_t>(pair)];
    }
    /// Antisymmetric access Delta_ij with arbitrary i, j.
    std::complex<double> at(std::size_t ordinal, int i, int j) const {
        if (i == j) return 0.0;
        const StencilAlgebra& alg = StencilAlgebra::get(grid->n());
        return i < j ? at(ordinal, alg.pair_ordinal(i, j)) : -at(ordinal, alg.pair_ordinal(j, i));
    }
};

inline BastonCoeffs fd_baston_coeffs(const GridField& u) {
    const Grid& g = u.grid();
    detail::require_interior_stencil(g);
    const StencilAlgebra& alg = StencilAlgebra::get(g.n());
    const auto np = static_cast<std::size_t>(alg.num_pairs());
    const auto& nodes = g.interior_nodes();
    BastonCoeffs out{u.grid_ptr(), alg.pairs(), std::vector<std::complex<double>>(nodes.size() * np)};
    const auto d = static_cast<std::size_t>(g.dim());
    parallel_chunks(nodes.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> hess(d * d);
        for (std::size_t k = b; k < e; ++k) {
            node_hessian(u, nodes[k], hess);
            alg.baston(hess, std::span<std::complex<double>>(out.values.data() + k * np, np));
        }
    });
    return out;
}

/// Raw pointwise top coefficient of Delta u_1 ^ ... ^ Delta u_n (real part),
/// full-grid layout with zeros off the interior. Not clamped.
struct RawDensity {
    std::vector<double> value;
    std::vector<double> scale;  // local Hessian scale max|d_a d_b u_k| per node
    double max_imag = 0.0;
};

inline RawDensity ma_values(std::span<const GridField* const> us) {
    require(!us.empty(), "ma_density: no arguments");
    const Grid& g = us[0]->grid();
    const int n = g.n();
    require(static_cast<int>(us.size()) == n, "ma_density: need exactly n fields");
    for (const auto* u : us) us[0]->check_same_grid(*u);
    detail::require_interior_stencil(g);
    const StencilAlgebra& alg = StencilAlgebra::get(n);
    const auto np = static_cast<std::size_t>(alg.num_pairs());
    const auto d = static_cast<std::size_t>(g.dim());

    // distinct arguments are differentiated once
    std::vector<int> slot(us.size());
    std::vector<const GridField*> distinct;
    for (std::size_t k = 0; k < us.size(); ++k) {
        auto it = std::find(distinct.begin(), distinct.end(), us[k]);
        slot[k] = static_cast<int>(it - distinct.begin());
        if (it == distinct.end()) distinct.push_back(us[k]);
    }

    RawDensity out{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0), 0.0};
    const auto& nodes = g.interior_nodes();
    std::vector<double> imag(nodes.size(), 0.0);
    parallel_chunks(nodes.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> hess(d * d);
        std::vector<std::complex<double>> forms(distinct.size() * np);
        std::vector<const std::complex<double>*> ptrs(us.size());
        for (std::size_t k = b; k < e; ++k) {
            const std::size_t i = nodes[k];
            double scale = 0.0;
            for (std::size_t s = 0; s < distinct.size(); ++s) {
                node_hessian(*distinct[s], i, hess);
                for (double hv : hess) scale = std::max(scale, std::abs(hv));
                auto* f = forms.data() + s * np;
                alg.baston(hess, std::span<std::complex<double>>(f, np));
                for (std::size_t p = 0; p < np; ++p) f[p] *= 2.0;  // w^{ij} coefficient of Delta u
            }
            for (std::size_t q = 0; q < us.size(); ++q) ptrs[q] = forms.data() + static_cast<std::size_t>(slot[q]) * np;
            const std::complex<double> t = alg.top(ptrs);
            out.value[i] = t.real();
            out.scale[i] = scale;
            imag[k] = std::abs(t.imag());
        }
    });
    for (double v : imag) out.max_imag = std::max(out.max_imag, v);
    return out;
}

/// Negative-density band: 10 h^2 S^n (plus a rounding floor), S the local Hessian scale.
inline double negative_tolerance(const Grid& g, double scale) {
    const double h = g.h_max();
    return (10.0 * h * h + 1e-10) * std::pow(std::max(scale, 1e-300), g.n());
}

inline MeasureDensity clamp_density(GridPtr g, const RawDensity& raw) {
    MeasureDensity out;
    out.grid = g;
    out.density.assign(g->size(), 0.0);
    out.max_imag = raw.max_imag;
    for (std::uint32_t i : g->interior_nodes()) {
        const double v = raw.value[i];
        if (v >= 0.0) {
            out.density[i] = v;
            continue;
        }
        if (!g->core(i)) continue;  // stencil reaches past the domain boundary
        out.worst_negative = std::min(out.worst_negative, v);
        if (v < -negative_tolerance(*g, raw.scale[i])) {
            out.non_psh = true;
            ++out.flagged;
        }
    }
    return out;
}

/// Monge-Ampere density of (Delta u_1 ^ ... ^ Delta u_n) against Lebesgue measure:
/// the Omega_{2n} coefficient, negatives floored to zero and flagged beyond the band.
inline MeasureDensity ma_density(std::span<const GridField* const> us) {
    return clamp_density(us[0]->grid_ptr(), ma_values(us));
}

inline MeasureDensity ma_density(std::initializer_list<const GridField*> us) {
    return ma_density(std::span<const GridField* const>(us.begin(), us.size()));
}

inline MeasureDensity ma_density(const GridField& u) {
    std::vector<const GridField*> args(static_cast<std::size_t>(u.grid().n()), &u);
    return ma_density(std::span<const GridField* const>(args));
}

/// Integral of f against mu: sum f * density * h^{4n}.
inline double integrate(std::span<const double> f, const MeasureDensity& mu) {
    require(f.size() == mu.density.size(), "integrate: shape mismatch");
    CompensatedSum s;
    for (std::uint32_t i : mu.grid->interior_nodes()) s.add(f[i] * mu.density[i]);
    return s.value() * mu.grid->cell_volume();
}

inline double integrate(const GridField& f, const MeasureDensity& mu) {
    require(f.grid().same_as(*mu.grid), "integrate: field and measure on different grids");
    return integrate(std::span<const double>(f.values()), mu);
}

/// Integral of f against mu restricted to nodes where keep(i) is true.
template <typename Pred>
double integrate_where(std::span<const double> f, const MeasureDensity& mu, Pred&& keep) {
    require(f.size() == mu.density.size(), "integrate: shape mismatch");
    CompensatedSum s;
    for (std::uint32_t i : mu.grid->interior_nodes())
        if (keep(static_cast<std::size_t>(i))) s.add(f[i] * mu.density[i]);
    return s.value() * mu.grid->cell_volume();
}

/// Mass of mu on the nodes selected by keep.
template <typename Pred>
double mass_where(const MeasureDensity& mu, Pred&& keep) {
    CompensatedSum s;
    for (std::uint32_t i : mu.grid->interior_nodes())
        if (keep(static_cast<std::size_t>(i))) s.add(mu.density[i]);
    return s.value() * mu.grid->cell_volume();
}

/// Integral of f against Lebesgue measure over the interior nodes.
inline double integrate_volume(std::span<const double> f, const Grid& g) {
    require(f.size() == g.size(), "integrate: shape mismatch");
    CompensatedSum s;
    for (std::uint32_t i : g.interior_nodes()) s.add(f[i]);
    return s.value() * g.cell_volume();
}

inline double integrate_volume(const GridField& f) { return integrate_volume(f.values(), f.grid()); }

/// Separable convolution with a tent kernel of radius eps along every axis.
/// Near the box the kernel is truncated symmetrically, so it stays centered;
/// non-interior nodes keep their trace.
inline GridField mollify(const GridField& u, double eps) {
    const Grid& g = u.grid();
    for (int a = 0; a < g.dim(); ++a) require(eps >= g.h(a) * (1.0 - 1e-12), "mollify: width must be >= h");
    std::vector<double> cur = u.values();
    std::vector<double> next(cur.size());
    for (int a = 0; a < g.dim(); ++a) {
        const double h = g.h(a);
        const int radius = static_cast<int>(std::floor(eps / h + 1e-9));
        std::vector<double> w(static_cast<std::size_t>(radius + 1));
        for (int k = 0; k <= radius; ++k) w[static_cast<std::size_t>(k)] = 1.0 - k * h / (eps + h);
        const std::size_t s = g.stride(a);
        parallel_chunks(cur.size(), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const int idx = g.axis_index(i, a);
                const int r = std::min({radius, idx, g.m() - 1 - idx});
                double acc = w[0] * cur[i];
                double norm = w[0];
                for (int k = 1; k <= r; ++k) {
                    const double wk = w[static_cast<std::size_t>(k)];
                    acc += wk * (cur[i + static_cast<std::size_t>(k) * s] + cur[i - static_cast<std::size_t>(k) * s]);
                    norm += 2.0 * wk;
                }
                next[i] = acc / norm;
            }
        });
        std::swap(cur, next);
    }
    for (std::size_t i = 0; i < cur.size(); ++i)
        if (!g.interior(i)) cur[i] = u[i];
    return GridField(u.grid_ptr(), std::move(cur));
}

/// One coefficient t_I w^I of a (2n-1)-form, given as a complex function of position.
struct StokesTerm {
    MultiIndex index;
    std::function<std::complex<double>(std::span<const double>)> coeff;
};

struct StokesResult {
    std::complex<double> h_dT;     // integral of h d_alpha T
    std::complex<double> dh_T;     // integral of d_alpha h ^ T
    double residual = 0.0;         // |h_dT + dh_T|
};

/// Discrete check of int h d_alpha T = - int d_alpha h ^ T with centered first differences.
inline StokesResult stokes_residual(int alpha, const std::vector<StokesTerm>& form, const GridField& h) {
    const Grid& g = h.grid();
    const int n = g.n();
    require(alpha == 0 || alpha == 1, "stokes_residual: alpha must be 0 or 1");
    require(h.trace_sup_norm() <= 1e-13, "stokes_residual: h must vanish on the boundary");
    const StencilAlgebra& alg = StencilAlgebra::get(n);
    std::vector<std::vector<std::complex<double>>> coeffs;
    for (const auto& t : form) {
        require(t.index.degree() == 2 * n - 1, "stokes_residual: T must have degree 2n-1");
        std::vector<std::complex<double>> c(g.size());
        std::vector<double> x(static_cast<std::size_t>(g.dim()));
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.coords(i, x);
            c[i] = t.coeff(x);
        }
        coeffs.push_back(std::move(c));
    }
    const auto d = static_cast<std::size_t>(g.dim());
    std::complex<double> s1 = 0.0, s2 = 0.0;
    std::vector<double> grad_h(d);
    for (std::uint32_t i : g.interior_nodes()) {
        for (std::size_t a = 0; a < d; ++a) grad_h[a] = node_gradient(h, i, static_cast<int>(a));
        for (std::size_t term = 0; term < form.size(); ++term) {
            const auto& c = coeffs[term];
            for (int k = 0; k < 2 * n; ++k) {
                const int sign = wedge_sign(MultiIndex::single(k), form[term].index);
                if (sign == 0) continue;
                std::complex<double> nab_t = 0.0;
                const auto& r = alg.row(k, alpha);
                for (std::size_t a = 0; a < d; ++a) {
                    if (r[a] == 0.0) continue;
                    const std::size_t s = g.stride(static_cast<int>(a));
                    nab_t += r[a] * (c[i + s] - c[i - s]) / (2.0 * g.h(static_cast<int>(a)));
                }
                const std::complex<double> nab_h = alg.nabla(k, alpha, grad_h);
                s1 += static_cast<double>(sign) * h[i] * nab_t;
                s2 += static_cast<double>(sign) * nab_h * c[i];
            }
        }
    }
    StokesResult out;
    out.h_dT = s1 * g.cell_volume();
    out.dh_T = s2 * g.cell_volume();
    out.residual = std::abs(out.h_dT + out.dh_T);
    return out;
}

} // namespace qma
