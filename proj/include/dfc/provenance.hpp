#pragma once

#include "dfc/relation.hpp"

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dfc {

/// One derivation: the multiset of input tuples jointly producing an output tuple.
/// Factors are kept sorted so equality is structural.
class Monomial {
public:
    Monomial() = default;
    static Monomial of(TupleId id) { return Monomial(std::vector<TupleId>{id}); }
    static Monomial from_factors(std::vector<TupleId> factors);

    std::span<const TupleId> factors() const { return factors_; }
    std::size_t degree() const { return factors_.size(); }
    bool empty() const { return factors_.empty(); }

    /// Multiset union of factors.
    Monomial times(const Monomial &other) const;

    auto operator<=>(const Monomial &) const = default;
    bool operator==(const Monomial &) const = default;

private:
    explicit Monomial(std::vector<TupleId> sorted) : factors_(std::move(sorted)) {}
    std::vector<TupleId> factors_;
};

/// Provenance polynomial in standard form: a set of monomials (no coefficients).
class Polynomial {
public:
    Polynomial() = default;
    static Polynomial of(TupleId id) { return Polynomial(std::vector<Monomial>{Monomial::of(id)}); }

    std::span<const Monomial> monomials() const { return monomials_; }
    std::size_t size() const { return monomials_.size(); }
    bool empty() const { return monomials_.empty(); }

    /// Debug text form, e.g. `a1*b1 + a1*b2`.
    std::string to_string(const Database &db) const;

    bool operator==(const Polynomial &) const = default;

    friend Polynomial normalize(std::vector<Monomial> monomials);

private:
    explicit Polynomial(std::vector<Monomial> sorted_unique) : monomials_(std::move(sorted_unique)) {}
    std::vector<Monomial> monomials_;
};

/// Sorts and deduplicates monomials into standard form.
Polynomial normalize(std::vector<Monomial> monomials);

/// The polynomial holding only the empty monomial; a fold seed for products.
Polynomial poly_one();
/// Standard-form product: pairwise multiset union of monomials, deduplicated.
Polynomial poly_mul(const Polynomial &p, const Polynomial &q);
/// Standard-form sum: set union of monomials.
Polynomial poly_add(const Polynomial &p, const Polynomial &q);
/// Sum of many polynomials in one pass.
Polynomial poly_sum(std::span<const Polynomial> terms);

/// Distinct tuples of `relation` appearing in any monomial, in TupleId order.
std::vector<TupleId> contributors(const Polynomial &p, std::uint32_t relation);
/// Same, naming the relation; unknown relations yield no contributors.
std::vector<TupleId> contributors(const Polynomial &p, const Database &db, std::string_view relation);

} // namespace dfc
