#pragma once

// Exact polynomial calculus on R^{4n}: the first-order operators nabla_{ja},
// d0, d1, the Baston operator and wedge products of Baston forms.

#include "qma/error.hpp"
#include "qma/qform.hpp"
#include "qma/scalar.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <vector>

namespace qma {

inline constexpr int kMaxPolyN = 2;
inline constexpr int kMaxVars = 4 * kMaxPolyN;

/// Exponent vector over x_0..x_7 packed eight bits per variable.
class Monomial {
public:
    Monomial() = default;

    static Monomial variable(int m) {
        require(m >= 0 && m < kMaxVars, "Monomial: variable index out of range");
        Monomial out;
        out.packed_ = std::uint64_t{1} << (8 * m);
        return out;
    }

    int exponent(int m) const { return static_cast<int>((packed_ >> (8 * m)) & 0xffu); }

    int degree() const {
        int d = 0;
        for (int m = 0; m < kMaxVars; ++m) d += exponent(m);
        return d;
    }

    /// Highest variable index that appears, or -1 for the constant monomial.
    int max_variable() const {
        for (int m = kMaxVars - 1; m >= 0; --m)
            if (exponent(m) != 0) return m;
        return -1;
    }

    friend Monomial operator*(Monomial a, Monomial b) {
        for (int m = 0; m < kMaxVars; ++m)
            require(a.exponent(m) + b.exponent(m) < 256, "Monomial: exponent overflow");
        Monomial out;
        out.packed_ = a.packed_ + b.packed_;
        return out;
    }

    /// Lowers exponent of x_m by one; caller checks it is positive.
    Monomial lowered(int m) const {
        Monomial out;
        out.packed_ = packed_ - (std::uint64_t{1} << (8 * m));
        return out;
    }

    std::uint64_t packed() const { return packed_; }
    friend auto operator<=>(Monomial a, Monomial b) = default;

private:
    std::uint64_t packed_ = 0;
};

/// Polynomial on R^{4n} with complex rational coefficients, canonical
/// (no stored zeros). n == 0 marks a dimension-agnostic zero/constant.
class PolyField {
public:
    using Terms = std::map<Monomial, ComplexRational>;

    PolyField() = default;

    explicit PolyField(int n) : n_(n) {
        require(n >= 0 && n <= kMaxPolyN, "PolyField: n must be 1 or 2");
    }

    static PolyField constant(int n, ComplexRational c) {
        PolyField p(n);
        p.add_term(Monomial{}, std::move(c));
        return p;
    }

    static PolyField variable(int n, int m) {
        require(n >= 1 && m >= 0 && m < 4 * n, "PolyField: variable out of range");
        PolyField p(n);
        p.add_term(Monomial::variable(m), ComplexRational(Rational(1)));
        return p;
    }

    int n() const { return n_; }
    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    int degree() const {
        int d = -1;
        for (const auto& [mono, c] : terms_) d = std::max(d, mono.degree());
        return d;
    }

    bool is_real() const {
        for (const auto& [mono, c] : terms_)
            if (c.im != 0) return false;
        return true;
    }

    PolyField real_part() const {
        PolyField out(n_);
        for (const auto& [mono, c] : terms_) out.add_term(mono, ComplexRational(c.re));
        return out;
    }

    /// Constant coefficient (value at the origin).
    ComplexRational constant_term() const {
        auto it = terms_.find(Monomial{});
        return it == terms_.end() ? ComplexRational{} : it->second;
    }

    void add_term(Monomial mono, ComplexRational c) {
        require(mono.max_variable() < 4 * std::max(n_, 1) || n_ == 0, "PolyField: variable beyond 4n");
        if (c.is_zero()) return;
        auto [it, inserted] = terms_.try_emplace(mono, std::move(c));
        if (!inserted) {
            it->second += c;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    /// Formal partial derivative in x_m.
    PolyField derivative(int m) const {
        require(m >= 0 && m < kMaxVars, "derivative: variable out of range");
        PolyField out(n_);
        for (const auto& [mono, c] : terms_) {
            const int e = mono.exponent(m);
            if (e == 0) continue;
            out.add_term(mono.lowered(m), ComplexRational(Rational(e)) * c);
        }
        return out;
    }

    PolyField& operator+=(const PolyField& o) {
        adopt(o);
        for (const auto& [mono, c] : o.terms_) add_term(mono, c);
        return *this;
    }
    PolyField& operator-=(const PolyField& o) {
        adopt(o);
        for (const auto& [mono, c] : o.terms_) add_term(mono, -c);
        return *this;
    }
    PolyField& operator*=(const PolyField& o) { return *this = *this * o; }

    friend PolyField operator+(PolyField a, const PolyField& b) { return a += b; }
    friend PolyField operator-(PolyField a, const PolyField& b) { return a -= b; }
    friend PolyField operator-(const PolyField& a) {
        PolyField out(a.n_);
        for (const auto& [mono, c] : a.terms_) out.terms_.emplace(mono, -c);
        return out;
    }
    friend PolyField operator*(const PolyField& a, const PolyField& b) {
        PolyField out(std::max(a.n_, b.n_));
        for (const auto& [ma, ca] : a.terms_)
            for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
        return out;
    }
    friend PolyField operator*(const ComplexRational& s, const PolyField& p) {
        PolyField out(p.n_);
        for (const auto& [mono, c] : p.terms_) out.add_term(mono, s * c);
        return out;
    }
    friend bool operator==(const PolyField& a, const PolyField& b) { return a.terms_ == b.terms_; }

    /// Exact value at a rational point of R^{4n}.
    ComplexRational evaluate(std::span<const Rational> x) const {
        ComplexRational acc;
        for (const auto& [mono, c] : terms_) {
            Rational v(1);
            for (int m = 0; m < kMaxVars; ++m)
                for (int e = 0; e < mono.exponent(m); ++e) v *= x[static_cast<std::size_t>(m)];
            acc += c * ComplexRational(v);
        }
        return acc;
    }

    /// Floating-point value at a point of R^{4n}.
    std::complex<double> evaluate(std::span<const double> x) const {
        std::complex<double> acc{};
        for (const auto& [mono, c] : terms_) {
            double v = 1.0;
            for (int m = 0; m < kMaxVars; ++m)
                for (int e = 0; e < mono.exponent(m); ++e) v *= x[static_cast<std::size_t>(m)];
            acc += std::complex<double>(c.re.get_d(), c.im.get_d()) * v;
        }
        return acc;
    }

    friend std::ostream& operator<<(std::ostream& os, const PolyField& p) {
        if (p.terms_.empty()) return os << "0";
        bool first = true;
        for (const auto& [mono, c] : p.terms_) {
            if (!first) os << " + ";
            os << "(" << c << ")";
            for (int m = 0; m < kMaxVars; ++m) {
                const int e = mono.exponent(m);
                if (e == 1) os << "*x" << m;
                if (e > 1) os << "*x" << m << "^" << e;
            }
            first = false;
        }
        return os;
    }

private:
    void adopt(const PolyField& o) {
        if (n_ == 0) n_ = o.n_;
        require(o.n_ == 0 || o.n_ == n_, "PolyField: dimension mismatch");
    }

    int n_ = 0;
    Terms terms_;
};

inline bool is_zero(const PolyField& p) { return p.is_zero(); }

template <>
struct RingTraits<PolyField> {
    static PolyField zero() { return PolyField(); }
    static PolyField one() { return PolyField::constant(0, ComplexRational(Rational(1))); }
};

/// One entry of the nabla table: a sum of c_m * d/dx_m with c_m in {+-1, +-i}.
struct FirstOrderOperator {
    struct Term {
        int var;
        int re;  // coefficient = re + i*im, one of them zero
        int im;
    };
    std::vector<Term> terms;
};

/// The 2n x 2 array of operators nabla_{j alpha}. Rows (2l, 2l+1) act on the
/// coordinates x_{4l..4l+3} of q_l = x_{4l} + i x_{4l+1} + j x_{4l+2} + k x_{4l+3}:
///
///   nabla_{(2l)0}   =  d_{4l}   + i d_{4l+1}    nabla_{(2l)1}   = -d_{4l+2} - i d_{4l+3}
///   nabla_{(2l+1)0} =  d_{4l+2} - i d_{4l+3}    nabla_{(2l+1)1} =  d_{4l}   - i d_{4l+1}
class NablaTable {
public:
    explicit NablaTable(int n) : n_(n) {
        require(n >= 1 && n <= 4, "NablaTable: n out of range");
        ops_.resize(static_cast<std::size_t>(4 * n));
        for (int l = 0; l < n; ++l) {
            const int b = 4 * l;
            at(2 * l, 0) = {{{b, 1, 0}, {b + 1, 0, 1}}};
            at(2 * l, 1) = {{{b + 2, -1, 0}, {b + 3, 0, -1}}};
            at(2 * l + 1, 0) = {{{b + 2, 1, 0}, {b + 3, 0, -1}}};
            at(2 * l + 1, 1) = {{{b, 1, 0}, {b + 1, 0, -1}}};
        }
    }

    int n() const { return n_; }

    const FirstOrderOperator& operator()(int j, int alpha) const {
        require(j >= 0 && j < 2 * n_ && (alpha == 0 || alpha == 1), "nabla: index out of range");
        return ops_[static_cast<std::size_t>(2 * j + alpha)];
    }

    /// Dense complex coefficient row of nabla_{j alpha} over the 4n variables.
    std::vector<std::complex<double>> row(int j, int alpha) const {
        std::vector<std::complex<double>> out(static_cast<std::size_t>(4 * n_));
        for (const auto& t : (*this)(j, alpha).terms)
            out[static_cast<std::size_t>(t.var)] = {static_cast<double>(t.re), static_cast<double>(t.im)};
        return out;
    }

private:
    FirstOrderOperator& at(int j, int alpha) { return ops_[static_cast<std::size_t>(2 * j + alpha)]; }

    int n_;
    std::vector<FirstOrderOperator> ops_;
};

inline PolyField nabla_apply(const NablaTable& table, int j, int alpha, const PolyField& u) {
    const auto& op = table(j, alpha);
    PolyField out(table.n());
    for (const auto& t : op.terms) {
        PolyField du = u.derivative(t.var);
        out += ComplexRational(Rational(t.re), Rational(t.im)) * du;
    }
    return out;
}

inline PolyField nabla_apply(int n, int j, int alpha, const PolyField& u) {
    return nabla_apply(NablaTable(n), j, alpha, u);
}

using PolyForm = Form<PolyField>;

/// d_alpha F = sum_{k,I} nabla_{k alpha} f_I w^k ^ w^I.
inline PolyForm d_alpha(int alpha, const PolyForm& f) {
    require(f.degree() < 2 * f.n(), "d0/d1: input already has top degree");
    const NablaTable table(f.n());
    PolyForm out(f.n(), f.degree() + 1);
    for (int k = 0; k < 2 * f.n(); ++k) {
        const MultiIndex wk = MultiIndex::single(k);
        for (const auto& [idx, coeff] : f.terms()) {
            const int sign = wedge_sign(wk, idx);
            if (sign == 0) continue;
            PolyField g = nabla_apply(table, k, alpha, coeff);
            if (g.is_zero()) continue;
            out.add(MultiIndex::from_bits(wk.bits() | idx.bits()), sign > 0 ? g : -g);
        }
    }
    return out;
}

inline PolyForm d0(const PolyForm& f) { return d_alpha(0, f); }
inline PolyForm d1(const PolyForm& f) { return d_alpha(1, f); }

inline PolyForm as_form(int n, const PolyField& u) { return PolyForm::scalar(n, u); }

/// Delta_{ij} u = 1/2 (nabla_{i0} nabla_{j1} u - nabla_{i1} nabla_{j0} u).
inline PolyField baston_coefficient(const NablaTable& table, int i, int j, const PolyField& u) {
    PolyField a = nabla_apply(table, i, 0, nabla_apply(table, j, 1, u));
    PolyField b = nabla_apply(table, i, 1, nabla_apply(table, j, 0, u));
    return ComplexRational(Rational(1, 2)) * (a - b);
}

/// Delta u = sum_{i,j} Delta_{ij} u w^i ^ w^j, assembled from the Delta_{ij} table.
inline PolyForm baston(int n, const PolyField& u) {
    const NablaTable table(n);
    PolyForm out(n, 2);
    for (int i = 0; i < 2 * n; ++i) {
        for (int j = 0; j < 2 * n; ++j) {
            if (i == j) continue;
            PolyField c = baston_coefficient(table, i, j, u);
            const MultiIndex ij = MultiIndex::from_bits((1u << i) | (1u << j));
            out.add(ij, i < j ? c : -c);
        }
    }
    return out;
}

/// Delta u computed as d0(d1 u).
inline PolyForm baston_d0d1(int n, const PolyField& u) { return d0(d1(as_form(n, u))); }

/// Delta u_1 ^ ... ^ Delta u_k. For k = n the result has top degree.
inline PolyForm ma_product(int n, std::span<const PolyField> us) {
    require(us.size() <= static_cast<std::size_t>(n), "ma_product: more factors than n");
    PolyForm acc = PolyForm::scalar(n, PolyField::constant(n, ComplexRational(Rational(1))));
    for (const auto& u : us) acc = wedge(acc, baston(n, u));
    return acc;
}

/// Brute-force delta-symbol sum sum sign * Delta_{i1j1}u_1 ... Delta_{injn}u_n
/// over all ordered index tuples. Independent of the wedge machinery.
inline PolyField delta_sum(int n, std::span<const PolyField> us) {
    require(us.size() == static_cast<std::size_t>(n), "delta_sum: need exactly n factors");
    const NablaTable table(n);
    // Delta_{ij} u_k cache
    std::vector<std::vector<PolyField>> coeff(us.size());
    for (std::size_t k = 0; k < us.size(); ++k)
        for (int i = 0; i < 2 * n; ++i)
            for (int j = 0; j < 2 * n; ++j) coeff[k].push_back(baston_coefficient(table, i, j, us[k]));
    PolyField acc(n);
    for (const auto& term : delta_expansion(n)) {
        PolyField prod = PolyField::constant(n, ComplexRational(Rational(term.sign)));
        for (int k = 0; k < n; ++k) {
            const int i = term.seq[static_cast<std::size_t>(2 * k)];
            const int j = term.seq[static_cast<std::size_t>(2 * k + 1)];
            prod = prod * coeff[static_cast<std::size_t>(k)][static_cast<std::size_t>(2 * n * i + j)];
        }
        acc += prod;
    }
    return acc;
}

} // namespace qma
