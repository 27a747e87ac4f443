// SPDX-License-Identifier: Apache-2.0
/**
 * @file oracle.hpp
 * @brief Brute-force exact counting: the ground truth for every other module.
 *
 * Enumeration assigns constrained variables in order of descending constraint
 * degree and checks every constraint as soon as its scope is fully assigned.
 * Variables that occur in no constraint contribute a factor equal to the size
 * of their domain.  Counts are exact (arbitrary precision).
 */
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include <boost/multiprecision/cpp_int.hpp>

#include "modcsp/core.hpp"

namespace modcsp {

using BigInt = boost::multiprecision::cpp_int;

struct Residue {
    std::uint64_t value{};
    std::uint64_t modulus{};
    friend bool operator==(const Residue&, const Residue&) = default;
};

/// An exact homomorphism/solution count, optionally reduced modulo a prime.
struct HomCount {
    BigInt exact;
    std::optional<Residue> reduced;

    /// Returns a copy carrying the residue modulo `p` (p must be prime).
    [[nodiscard]] HomCount reduce(std::uint64_t p) const;
};

/// Deterministic primality test by trial division.
[[nodiscard]] bool is_prime(std::uint64_t n);
/// Throws PreconditionError unless `p` is prime.
void require_prime(std::uint64_t p);
/// Nonnegative residue of `x` modulo `m`.
[[nodiscard]] std::uint64_t residue(const BigInt& x, std::uint64_t m);

/// Optional per-variable domain restriction; std::nullopt means "whole sort".
using Domains = std::vector<std::optional<std::vector<Element>>>;

/// Calls `visit` on every solution of `p` over `h` (honouring `domains` when
/// given) in the enumeration order; `visit` returns false to stop early.
void for_each_solution(const Instance& p, const Structure& h,
                       const std::function<bool(const Assignment&)>& visit, const Domains* domains = nullptr);

[[nodiscard]] HomCount count_solutions(const Instance& p, const Structure& h, const Domains* domains = nullptr);
[[nodiscard]] std::uint64_t count_solutions_mod(const Instance& p, const Structure& h, std::uint64_t prime,
                                                const Domains* domains = nullptr);
[[nodiscard]] bool is_satisfiable(const Instance& p, const Structure& h, const Domains* domains = nullptr);
/// The first solution in enumeration order, if any.
[[nodiscard]] std::optional<Assignment> first_solution(const Instance& p, const Structure& h,
                                                       const Domains* domains = nullptr);

[[nodiscard]] HomCount count_hom(const Structure& g, const Structure& h);
[[nodiscard]] std::uint64_t count_hom_mod(const Structure& g, const Structure& h, std::uint64_t prime);

/// Calls `visit` on every homomorphism g → h (as a Mapping).
void for_each_homomorphism(const Structure& g, const Structure& h, const std::function<bool(const Mapping&)>& visit);

/// Homomorphisms (K,z) → (G,x) mapping z_i to x_i.
[[nodiscard]] BigInt count_hom_anchored(const Anchored& k, const Anchored& g);
/// Injective homomorphisms (K,z) → (G,x) mapping z_i to x_i (injective on
/// every sort).
[[nodiscard]] BigInt count_inj(const Anchored& k, const Anchored& g);

/// Number of tuples of `r` whose restriction to `positions` equals `partial`.
[[nodiscard]] BigInt count_ext(const Relation& r, std::span<const std::size_t> positions,
                               std::span<const Element> partial);
[[nodiscard]] std::uint64_t count_ext_mod(const Relation& r, std::span<const std::size_t> positions,
                                          std::span<const Element> partial, std::uint64_t prime);
/// pr^p_I R: the restrictions to `positions` having a number of extensions
/// that is nonzero modulo `prime`.  The result is named `name`.
[[nodiscard]] Relation mod_projection(const Relation& r, std::span<const std::size_t> positions,
                                      std::uint64_t prime, std::string name = "pr");
/// Classical projection pr_I R.
[[nodiscard]] Relation projection(const Relation& r, std::span<const std::size_t> positions,
                                  std::string name = "pr");

/// Counts hom((K,z),(G,x)).
using HomOracle = std::function<BigInt(const Anchored&, const Anchored&)>;

/// Computes inj((K,z),(G,x)) from homomorphism counts through the identity
/// hom(K,G) = Σ_θ inj(K/θ, G) over all partitions θ of K, recursing on the
/// strictly smaller factor structures.
[[nodiscard]] BigInt inj_from_hom_by_mobius(const Anchored& k, const Anchored& g, const HomOracle& hom);

}  // namespace modcsp
