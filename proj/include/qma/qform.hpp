#pragma once

// Exterior algebra over C^{2n}: multi-indices, sparse forms, wedge product
// and the top form Omega_{2n} = w^0 ^ w^1 ^ ... ^ w^{2n-1}.
//
// The scalar type is a template parameter so the exact polynomial backend
// and the grid backend share the same combinatorics.

#include "qma/error.hpp"
#include "qma/scalar.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <ostream>
#include <span>
#include <vector>

namespace qma {

/// Strictly increasing list of basis indices in [0, 2n-1], stored as a bit set.
class MultiIndex {
public:
    static constexpr int kMaxIndex = 32;

    MultiIndex() = default;

    MultiIndex(std::initializer_list<int> indices) : MultiIndex(std::span<const int>(indices.begin(), indices.size())) {}

    /// Accepts only strictly increasing, in-range lists.
    explicit MultiIndex(std::span<const int> indices) {
        int prev = -1;
        for (int i : indices) {
            require(i >= 0 && i < kMaxIndex, "MultiIndex: index out of range");
            require(i > prev, "MultiIndex: indices must be strictly increasing");
            bits_ |= (std::uint32_t{1} << i);
            prev = i;
        }
    }

    static MultiIndex from_bits(std::uint32_t bits) {
        MultiIndex m;
        m.bits_ = bits;
        return m;
    }

    static MultiIndex single(int i) {
        require(i >= 0 && i < kMaxIndex, "MultiIndex: index out of range");
        return from_bits(std::uint32_t{1} << i);
    }

    /// The full index set {0, ..., dim-1}.
    static MultiIndex full(int dim) {
        require(dim >= 0 && dim <= kMaxIndex, "MultiIndex: dimension out of range");
        return from_bits(dim == kMaxIndex ? ~std::uint32_t{0} : ((std::uint32_t{1} << dim) - 1));
    }

    std::uint32_t bits() const { return bits_; }
    int degree() const { return std::popcount(bits_); }
    bool contains(int i) const { return (bits_ >> i) & 1u; }
    int max_index() const { return bits_ == 0 ? -1 : 31 - std::countl_zero(bits_); }

    std::vector<int> indices() const {
        std::vector<int> out;
        for (std::uint32_t b = bits_; b != 0; b &= b - 1) out.push_back(std::countr_zero(b));
        return out;
    }

    friend bool operator==(MultiIndex a, MultiIndex b) { return a.bits_ == b.bits_; }
    friend bool operator<(MultiIndex a, MultiIndex b) {
        // graded lexicographic on the sorted index lists
        if (a.degree() != b.degree()) return a.degree() < b.degree();
        std::uint32_t diff = a.bits_ ^ b.bits_;
        if (diff == 0) return false;
        std::uint32_t low = diff & (~diff + 1);
        return (a.bits_ & low) != 0;
    }

    friend std::ostream& operator<<(std::ostream& os, MultiIndex m) {
        os << "w^{";
        bool first = true;
        for (int i : m.indices()) {
            if (!first) os << ",";
            os << i;
            first = false;
        }
        return os << "}";
    }

private:
    std::uint32_t bits_ = 0;
};

/// Sign of w^A ^ w^B relative to w^{A u B}; zero when A and B overlap.
inline int wedge_sign(MultiIndex a, MultiIndex b) {
    if ((a.bits() & b.bits()) != 0) return 0;
    int swaps = 0;
    for (std::uint32_t rest = b.bits(); rest != 0; rest &= rest - 1) {
        int j = std::countr_zero(rest);
        std::uint32_t above = (j >= 31) ? 0u : (~std::uint32_t{0} << (j + 1));
        swaps += std::popcount(a.bits() & above);
    }
    return (swaps % 2 == 0) ? 1 : -1;
}

/// Sign of the permutation taking `seq` to (0, 1, ..., len-1); 0 on repeats.
/// Entries outside [0, len-1] are a domain error.
inline int permutation_sign(std::span<const int> seq) {
    const int len = static_cast<int>(seq.size());
    std::vector<char> seen(static_cast<std::size_t>(len), 0);
    for (int v : seq) {
        require(v >= 0 && v < len, "permutation_sign: entry out of range");
        if (seen[static_cast<std::size_t>(v)]) return 0;
        seen[static_cast<std::size_t>(v)] = 1;
    }
    // parity via cycle decomposition
    std::vector<char> visited(static_cast<std::size_t>(len), 0);
    int transpositions = 0;
    for (int start = 0; start < len; ++start) {
        if (visited[static_cast<std::size_t>(start)]) continue;
        int cycle = 0;
        for (int k = start; !visited[static_cast<std::size_t>(k)]; k = seq[static_cast<std::size_t>(k)]) {
            visited[static_cast<std::size_t>(k)] = 1;
            ++cycle;
        }
        transpositions += cycle - 1;
    }
    return (transpositions % 2 == 0) ? 1 : -1;
}

inline int permutation_sign(std::initializer_list<int> seq) {
    return permutation_sign(std::span<const int>(seq.begin(), seq.size()));
}

namespace detail {
template <typename S>
bool scalar_is_zero(const S& s) {
    return is_zero(s);
}
} // namespace detail

/// Sparse element of Lambda^p C^{2n} with coefficients in S. Absent keys are zero.
template <typename S>
class Form {
public:
    using Terms = std::map<MultiIndex, S>;

    Form(int n, int degree) : n_(n), degree_(degree) {
        require(n >= 1 && 2 * n <= MultiIndex::kMaxIndex, "Form: unsupported dimension");
        require(degree >= 0 && degree <= 2 * n, "Form: degree out of range");
    }

    /// Degree-0 form carrying a single scalar.
    static Form scalar(int n, S value) {
        Form f(n, 0);
        f.add(MultiIndex{}, std::move(value));
        return f;
    }

    static Form basis(int n, MultiIndex index, S coeff) {
        Form f(n, index.degree());
        f.add(index, std::move(coeff));
        return f;
    }

    /// coeff * Omega_{2n}
    static Form top(int n, S coeff) { return basis(n, MultiIndex::full(2 * n), std::move(coeff)); }

    int n() const { return n_; }
    int degree() const { return degree_; }
    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    /// Coefficient of w^I, or a zero scalar when absent.
    S coeff(MultiIndex index) const {
        auto it = terms_.find(index);
        return it == terms_.end() ? S{} : it->second;
    }

    /// Accumulates coeff into the w^I slot, dropping cancelled terms.
    void add(MultiIndex index, S coeff) {
        require(index.degree() == degree_, "Form: term degree does not match form degree");
        require(index.max_index() < 2 * n_, "Form: basis index out of range");
        if (detail::scalar_is_zero(coeff)) return;
        auto [it, inserted] = terms_.try_emplace(index, std::move(coeff));
        if (!inserted) {
            it->second += coeff;
            if (detail::scalar_is_zero(it->second)) terms_.erase(it);
        }
    }

    Form& operator+=(const Form& other) {
        check_compatible(other);
        for (const auto& [idx, c] : other.terms_) add(idx, c);
        return *this;
    }

    Form& operator-=(const Form& other) {
        check_compatible(other);
        for (const auto& [idx, c] : other.terms_) add(idx, -c);
        return *this;
    }

    friend Form operator+(Form a, const Form& b) { return a += b; }
    friend Form operator-(Form a, const Form& b) { return a -= b; }
    friend Form operator-(const Form& a) {
        Form out(a.n_, a.degree_);
        for (const auto& [idx, c] : a.terms_) out.terms_.emplace(idx, -c);
        return out;
    }

    /// Multiplies every coefficient by s (on the left).
    friend Form operator*(const S& s, const Form& f) {
        Form out(f.n_, f.degree_);
        for (const auto& [idx, c] : f.terms_) out.add(idx, s * c);
        return out;
    }

    friend bool operator==(const Form& a, const Form& b) {
        return a.n_ == b.n_ && a.degree_ == b.degree_ && a.terms_ == b.terms_;
    }

    friend std::ostream& operator<<(std::ostream& os, const Form& f) {
        if (f.terms_.empty()) return os << "0";
        bool first = true;
        for (const auto& [idx, c] : f.terms_) {
            if (!first) os << " + ";
            os << "(" << c << ")" << idx;
            first = false;
        }
        return os;
    }

private:
    void check_compatible(const Form& other) const {
        require(n_ == other.n_, "Form: dimension mismatch");
        require(degree_ == other.degree_, "Form: degree mismatch");
    }

    int n_;
    int degree_;
    Terms terms_;
};

/// s * Omega_{2n}
template <typename S>
struct TopForm {
    S scalar{};
};

template <typename S>
Form<S> wedge(const Form<S>& f, const Form<S>& g) {
    require(f.n() == g.n(), "wedge: dimension mismatch");
    require(f.degree() + g.degree() <= 2 * f.n(), "wedge: degree exceeds 2n");
    Form<S> out(f.n(), f.degree() + g.degree());
    for (const auto& [a, fa] : f.terms()) {
        for (const auto& [b, gb] : g.terms()) {
            const int sign = wedge_sign(a, b);
            if (sign == 0) continue;
            S prod = fa * gb;
            out.add(MultiIndex::from_bits(a.bits() | b.bits()), sign > 0 ? prod : S(-prod));
        }
    }
    return out;
}

/// Coefficient s of s * Omega_{2n}. The zero form of top degree gives zero.
template <typename S>
S top_coefficient(const Form<S>& f) {
    require(f.degree() == 2 * f.n(), "top_coefficient: form is not of top degree");
    return f.coeff(MultiIndex::full(2 * f.n()));
}

template <typename S>
TopForm<S> as_top_form(const Form<S>& f) {
    return TopForm<S>{top_coefficient(f)};
}

/// Every ordered tuple (i1, j1, ..., in, jn) that is a permutation of
/// (0, ..., 2n-1), paired with its sign. This is the support of the
/// delta-symbol expansion of du_1 ^ ... ^ du_n.
struct DeltaTerm {
    int sign;
    std::vector<int> seq;
};

inline std::vector<DeltaTerm> delta_expansion(int n) {
    require(n >= 1 && n <= 4, "delta_expansion: n out of supported range");
    std::vector<int> seq(static_cast<std::size_t>(2 * n));
    for (int i = 0; i < 2 * n; ++i) seq[static_cast<std::size_t>(i)] = i;
    std::vector<DeltaTerm> out;
    do {
        out.push_back({permutation_sign(seq), seq});
    } while (std::next_permutation(seq.begin(), seq.end()));
    return out;
}

} // namespace qma
