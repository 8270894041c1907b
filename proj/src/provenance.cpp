#include "dfc/provenance.hpp"

#include <algorithm>

namespace dfc {

Monomial Monomial::from_factors(std::vector<TupleId> factors) {
    std::sort(factors.begin(), factors.end());
    return Monomial(std::move(factors));
}

Monomial Monomial::times(const Monomial &other) const {
    std::vector<TupleId> out;
    out.reserve(factors_.size() + other.factors_.size());
    std::merge(factors_.begin(), factors_.end(), other.factors_.begin(), other.factors_.end(), std::back_inserter(out));
    return Monomial(std::move(out));
}

Polynomial normalize(std::vector<Monomial> monomials) {
    std::sort(monomials.begin(), monomials.end());
    monomials.erase(std::unique(monomials.begin(), monomials.end()), monomials.end());
    return Polynomial(std::move(monomials));
}

std::string Polynomial::to_string(const Database &db) const {
    std::string out;
    for (std::size_t i = 0; i < monomials_.size(); ++i) {
        if (i) out += " + ";
        const auto f = monomials_[i].factors();
        if (f.empty()) out += "1";
        for (std::size_t j = 0; j < f.size(); ++j) {
            if (j) out += "*";
            out += db.tuple_label(f[j]);
        }
    }
    return out;
}

Polynomial poly_one() { return normalize({Monomial()}); }

Polynomial poly_mul(const Polynomial &p, const Polynomial &q) {
    std::vector<Monomial> out;
    out.reserve(p.size() * q.size());
    for (const auto &a : p.monomials()) {
        for (const auto &b : q.monomials()) out.push_back(a.times(b));
    }
    return normalize(std::move(out));
}

Polynomial poly_add(const Polynomial &p, const Polynomial &q) {
    std::vector<Monomial> out;
    out.reserve(p.size() + q.size());
    std::set_union(p.monomials().begin(), p.monomials().end(), q.monomials().begin(), q.monomials().end(),
                   std::back_inserter(out));
    return normalize(std::move(out));
}

Polynomial poly_sum(std::span<const Polynomial> terms) {
    std::vector<Monomial> out;
    for (const auto &t : terms) out.insert(out.end(), t.monomials().begin(), t.monomials().end());
    return normalize(std::move(out));
}

std::vector<TupleId> contributors(const Polynomial &p, std::uint32_t relation) {
    std::vector<TupleId> out;
    for (const auto &m : p.monomials()) {
        for (const auto &f : m.factors()) {
            if (f.relation == relation) out.push_back(f);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<TupleId> contributors(const Polynomial &p, const Database &db, std::string_view relation) {
    auto id = db.find(relation);
    if (!id) return {};
    return contributors(p, *id);
}

} // namespace dfc
