#pragma once

// Exact, seeded verification of the first-order calculus identities:
// Leibniz rule for d0/d1, d_a^2 = 0, d0 d1 = -d1 d0, the chain of equal
// expressions for Delta u_1 ^ ... ^ Delta u_n, and the Moore-determinant
// correspondence (Delta u)^n = kappa_n n! det(u) Omega_{2n}.

#include "qma/error.hpp"
#include "qma/moore.hpp"
#include "qma/poly.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace qma {

enum class IdentityTag { Leibniz, DSquared, Anticommute, Chain, MooreCorrespondence };

inline IdentityTag parse_identity_tag(const std::string& s) {
    if (s == "leibniz") return IdentityTag::Leibniz;
    if (s == "d-squared") return IdentityTag::DSquared;
    if (s == "anticommute") return IdentityTag::Anticommute;
    if (s == "chain-2.3" || s == "chain") return IdentityTag::Chain;
    if (s == "moore-correspondence") return IdentityTag::MooreCorrespondence;
    throw DomainError("unknown identity tag: " + s);
}

inline std::string to_string(IdentityTag t) {
    switch (t) {
        case IdentityTag::Leibniz: return "leibniz";
        case IdentityTag::DSquared: return "d-squared";
        case IdentityTag::Anticommute: return "anticommute";
        case IdentityTag::Chain: return "chain-2.3";
        case IdentityTag::MooreCorrespondence: return "moore-correspondence";
    }
    return "?";
}

inline std::vector<IdentityTag> all_identity_tags() {
    return {IdentityTag::Leibniz, IdentityTag::DSquared, IdentityTag::Anticommute, IdentityTag::Chain,
            IdentityTag::MooreCorrespondence};
}

/// Seeded generator of small exact polynomials and forms.
class RandomPoly {
public:
    explicit RandomPoly(std::uint64_t seed) : rng_(seed) {}

    Rational rational() {
        std::uniform_int_distribution<int> num(-5, 5);
        std::uniform_int_distribution<int> den(1, 4);
        Rational q(num(rng_), den(rng_));
        q.canonicalize();
        return q;
    }

    /// Real polynomial of total degree <= max_degree with 1..max_terms terms.
    PolyField real_poly(int n, int max_degree = 3, int max_terms = 6) {
        return poly(n, max_degree, max_terms, false);
    }

    PolyField complex_poly(int n, int max_degree = 3, int max_terms = 4) {
        return poly(n, max_degree, max_terms, true);
    }

    /// Random sparse p-form with 1..3 nonzero complex polynomial coefficients.
    PolyForm form(int n, int degree) {
        PolyForm f(n, degree);
        std::uniform_int_distribution<int> count(1, 3);
        const int terms = count(rng_);
        for (int t = 0; t < terms; ++t) f.add(random_index(n, degree), complex_poly(n));
        return f;
    }

    /// Real quadratic x^T (B^T B) x with rational B: convex, hence PSH.
    PolyField psh_quadratic(int n) {
        const int d = 4 * n;
        std::vector<Rational> b(static_cast<std::size_t>(d * d));
        for (auto& x : b) x = rational();
        PolyField u(n);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) {
                Rational s(0);
                for (int k = 0; k < d; ++k)
                    s += b[static_cast<std::size_t>(k * d + r)] * b[static_cast<std::size_t>(k * d + c)];
                if (s == 0) continue;
                u += PolyField::constant(n, ComplexRational(s)) * PolyField::variable(n, r) * PolyField::variable(n, c);
            }
        return u;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    MultiIndex random_index(int n, int degree) {
        std::vector<int> pool(static_cast<std::size_t>(2 * n));
        for (int i = 0; i < 2 * n; ++i) pool[static_cast<std::size_t>(i)] = i;
        std::shuffle(pool.begin(), pool.end(), rng_);
        pool.resize(static_cast<std::size_t>(degree));
        std::sort(pool.begin(), pool.end());
        return MultiIndex(std::span<const int>(pool));
    }

    PolyField poly(int n, int max_degree, int max_terms, bool complex) {
        std::uniform_int_distribution<int> count(1, max_terms);
        std::uniform_int_distribution<int> deg(0, max_degree);
        std::uniform_int_distribution<int> var(0, 4 * n - 1);
        PolyField p(n);
        const int terms = count(rng_);
        for (int t = 0; t < terms; ++t) {
            Monomial mono;
            const int d = deg(rng_);
            for (int k = 0; k < d; ++k) mono = mono * Monomial::variable(var(rng_));
            ComplexRational c(rational(), complex ? rational() : Rational(0));
            p.add_term(mono, c);
        }
        return p;
    }

    std::mt19937_64 rng_;
};

struct IdentityReport {
    IdentityTag tag{};
    int n = 1;
    int trials = 0;
    std::uint64_t seed = 0;
    bool passed = true;
    int failures = 0;
    std::string worst_residual = "0";
    std::string kappa;  // moore-correspondence only

    nlohmann::json to_json() const {
        nlohmann::json j{{"tag", to_string(tag)},
                         {"n", n},
                         {"trials", trials},
                         {"seed", seed},
                         {"status", passed ? "pass" : "fail"},
                         {"failures", failures},
                         {"worst_residual", worst_residual}};
        if (!kappa.empty()) j["kappa"] = kappa;
        return j;
    }
};

struct IdentityOptions {
    /// Debug fault injection: d0/d1 drop the wedge sign of w^k ^ w^I.
    bool corrupt_operator = false;
};

namespace detail {

inline Rational abs_rational(const Rational& q) { return q < 0 ? Rational(-q) : q; }

/// Largest |re| or |im| over all coefficients of all polynomial coefficients.
inline Rational form_magnitude(const PolyForm& f) {
    Rational worst(0);
    for (const auto& [idx, p] : f.terms())
        for (const auto& [mono, c] : p.terms()) {
            worst = std::max(worst, abs_rational(c.re));
            worst = std::max(worst, abs_rational(c.im));
        }
    return worst;
}

inline PolyForm d_faulty(int alpha, const PolyForm& f) {
    const NablaTable table(f.n());
    PolyForm out(f.n(), f.degree() + 1);
    for (int k = 0; k < 2 * f.n(); ++k) {
        const MultiIndex wk = MultiIndex::single(k);
        for (const auto& [idx, coeff] : f.terms()) {
            if (wedge_sign(wk, idx) == 0) continue;
            out.add(MultiIndex::from_bits(wk.bits() | idx.bits()), nabla_apply(table, k, alpha, coeff));
        }
    }
    return out;
}

} // namespace detail

/// Runs `trials` seeded exact checks of one identity in dimension n.
/// Every residual must vanish exactly; the Moore check compares ratios to kappa_n.
inline IdentityReport verify_identity(IdentityTag tag, int n, int trials, std::uint64_t seed,
                                      const IdentityOptions& opts = {}) {
    require(n == 1 || n == 2, "verify_identity: n must be 1 or 2");
    require(trials >= 1, "verify_identity: need at least one trial");
    IdentityReport report;
    report.tag = tag;
    report.n = n;
    report.trials = trials;
    report.seed = seed;

    auto d = [&](int alpha, const PolyForm& f) {
        return opts.corrupt_operator ? detail::d_faulty(alpha, f) : d_alpha(alpha, f);
    };

    RandomPoly gen(seed);
    std::uniform_int_distribution<int> pick;
    Rational worst(0);
    auto record = [&](const PolyForm& residual) {
        const Rational mag = detail::form_magnitude(residual);
        if (!residual.is_zero()) {
            report.passed = false;
            ++report.failures;
        }
        worst = std::max(worst, mag);
    };

    const int top = 2 * n;
    for (int t = 0; t < trials; ++t) {
        switch (tag) {
            case IdentityTag::Leibniz: {
                // p + q + 1 <= 2n
                const int p = std::uniform_int_distribution<int>(0, top - 1)(gen.engine());
                const int q = std::uniform_int_distribution<int>(0, top - 1 - p)(gen.engine());
                PolyForm f = gen.form(n, p);
                PolyForm g = gen.form(n, q);
                for (int alpha = 0; alpha < 2; ++alpha) {
                    PolyForm lhs = d(alpha, wedge(f, g));
                    PolyForm rhs = wedge(d(alpha, f), g);
                    PolyForm tail = wedge(f, d(alpha, g));
                    rhs = (p % 2 == 0) ? rhs + tail : rhs - tail;
                    record(lhs - rhs);
                }
                break;
            }
            case IdentityTag::DSquared: {
                const int p = std::uniform_int_distribution<int>(0, top - 2)(gen.engine());
                PolyForm f = (p == 0) ? as_form(n, gen.real_poly(n)) : gen.form(n, p);
                record(d(0, d(0, f)));
                record(d(1, d(1, f)));
                break;
            }
            case IdentityTag::Anticommute: {
                const int p = std::uniform_int_distribution<int>(0, top - 2)(gen.engine());
                PolyForm f = (p == 0) ? as_form(n, gen.real_poly(n)) : gen.form(n, p);
                record(d(0, d(1, f)) + d(1, d(0, f)));
                break;
            }
            case IdentityTag::Chain: {
                std::vector<PolyField> us;
                for (int k = 0; k < n; ++k) us.push_back(gen.real_poly(n));
                // T = Delta u_2 ^ ... ^ Delta u_n, built with the operator under test
                PolyForm tail = PolyForm::scalar(n, PolyField::constant(n, ComplexRational(Rational(1))));
                for (int k = 1; k < n; ++k) tail = wedge(tail, d(0, d(1, as_form(n, us[static_cast<std::size_t>(k)]))));
                const PolyForm u1 = as_form(n, us[0]);
                const PolyForm lhs = wedge(d(0, d(1, u1)), tail);
                const PolyForm e1 = d(0, wedge(d(1, u1), tail));
                const PolyForm e2 = -d(1, wedge(d(0, u1), tail));
                const PolyForm u1t = wedge(u1, tail);
                const PolyForm e3 = d(0, d(1, u1t));
                const PolyForm e4 = d(0, d(1, u1t));  // Delta(F) := d0 d1 F
                const PolyForm table_route = ma_product(n, us);
                record(lhs - e1);
                record(lhs - e2);
                record(lhs - e3);
                record(lhs - e4);
                record(lhs - table_route);
                break;
            }
            case IdentityTag::MooreCorrespondence: {
                std::vector<PolyField> us;
                for (int k = 0; k < n; ++k) us.push_back(gen.psh_quadratic(n));
                // pure power and mixed product
                for (int mode = 0; mode < 2; ++mode) {
                    std::vector<PolyField> args = us;
                    if (mode == 0) std::fill(args.begin(), args.end(), us[0]);
                    PolyForm prod = PolyForm::scalar(n, PolyField::constant(n, ComplexRational(Rational(1))));
                    for (const auto& u : args) prod = wedge(prod, d(0, d(1, as_form(n, u))));
                    const PolyField topc = top_coefficient(prod);
                    const PolyField det = (mode == 0) ? moore_det(quaternionic_hessian(n, args[0]))
                                                      : mixed_moore_det(n, args);
                    Rational fact(1);
                    for (int k = 2; k <= n; ++k) fact *= k;
                    // both sides are constants for quadratic inputs
                    const ComplexRational tc = topc.constant_term();
                    const ComplexRational dc = det.constant_term();
                    if (dc.is_zero() || tc.im != 0 || dc.im != 0) {
                        report.passed = false;
                        ++report.failures;
                        continue;
                    }
                    const Rational ratio = tc.re / (fact * dc.re);
                    const Rational dev = detail::abs_rational(ratio - moore_kappa(n));
                    if (dev != 0) {
                        report.passed = false;
                        ++report.failures;
                    }
                    worst = std::max(worst, dev);
                    if (report.kappa.empty()) report.kappa = ratio.get_str();
                }
                break;
            }
        }
    }
    report.worst_residual = worst.get_str();
    return report;
}

} // namespace qma
