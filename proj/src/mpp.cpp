// SPDX-License-Identifier: Apache-2.0
/**
 * @file mpp.cpp
 * @brief Evaluation of (modular) primitive-positive formulas by block-wise
 *        counting, strictness checks and instance rewriting.
 */
#include "modcsp/mpp.hpp"

#include <map>
#include <set>

#include "modcsp/oracle.hpp"

namespace modcsp {

QuantifierBlock exists_block(std::vector<std::string> vars) {
    QuantifierBlock b;
    for (auto& v : vars) b.vars.push_back({std::move(v), ""});
    b.mode = Quantifier::Exists;
    return b;
}

QuantifierBlock modular_block(std::vector<std::string> vars, std::uint64_t p) {
    QuantifierBlock b = exists_block(std::move(vars));
    b.mode = Quantifier::Modular;
    b.p = p;
    return b;
}

// ---------------------------------------------------------------------------
// Type checking
// ---------------------------------------------------------------------------

MppFormula typecheck_formula(const Structure& h, const MppFormula& f) {
    MppFormula out = f;
    std::map<std::string, std::string> sort_of;
    std::set<std::string> declared;
    const auto declare = [&](const FormulaVariable& v, bool bound) {
        if (v.name.empty()) throw PreconditionError("formula variable with an empty name");
        if (!declared.insert(v.name).second) {
            throw PreconditionError("formula variable '" + v.name + "' is declared more than once");
        }
        if (!v.sort.empty()) {
            if (!h.find_sort(v.sort)) throw PreconditionError("formula variable '" + v.name + "' has unknown sort '" + v.sort + "'");
            sort_of[v.name] = v.sort;
        } else if (!bound) {
            throw PreconditionError("free variable '" + v.name + "' needs a sort");
        }
    };
    for (const auto& v : f.free) declare(v, false);
    for (const auto& b : f.blocks) {
        if (b.mode == Quantifier::Modular) require_prime(b.p);
        for (const auto& v : b.vars) declare(v, true);
    }
    const auto assign = [&](const std::string& var, const std::string& sort) {
        const auto [it, inserted] = sort_of.emplace(var, sort);
        if (!inserted && it->second != sort) {
            throw PreconditionError("formula variable '" + var + "' is used with sorts '" + it->second + "' and '" +
                                    sort + "'");
        }
        return inserted;
    };
    for (const auto& a : f.atoms) {
        for (const auto& v : a.args) {
            if (!declared.count(v)) throw PreconditionError("atom uses undeclared variable '" + v + "'");
        }
        if (a.relation == kEquality) {
            if (a.args.size() != 2) throw PreconditionError("equality atoms are binary");
            continue;
        }
        const Relation* r = h.find_relation(a.relation);
        if (r == nullptr) throw PreconditionError("atom uses unknown relation '" + a.relation + "'");
        if (r->arity() != a.args.size()) {
            throw PreconditionError("atom " + a.relation + " has " + std::to_string(a.args.size()) +
                                    " arguments but the relation has arity " + std::to_string(r->arity()));
        }
        for (std::size_t j = 0; j < a.args.size(); ++j) assign(a.args[j], h.sort(r->signature[j]).name);
    }
    // Propagate sorts along equalities until nothing changes.
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& a : f.atoms) {
            if (a.relation != kEquality) continue;
            const auto l = sort_of.find(a.args[0]);
            const auto r = sort_of.find(a.args[1]);
            if (l != sort_of.end() && r != sort_of.end()) {
                if (l->second != r->second) {
                    throw PreconditionError("equality between '" + a.args[0] + "' and '" + a.args[1] +
                                            "' of different sorts");
                }
            } else if (l != sort_of.end()) {
                changed = assign(a.args[1], l->second) || changed;
            } else if (r != sort_of.end()) {
                changed = assign(a.args[0], r->second) || changed;
            }
        }
    }
    for (auto& b : out.blocks) {
        for (auto& v : b.vars) {
            if (const auto it = sort_of.find(v.name); it != sort_of.end()) {
                v.sort = it->second;
            } else if (h.sort_count() == 1) {
                v.sort = h.sorts()[0].name;
            } else {
                throw PreconditionError("cannot infer the sort of bound variable '" + v.name + "'");
            }
        }
        if (b.mode == Quantifier::Exists) b.p = 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

/// Block-wise evaluator over the body instance (free variables first, then
/// the bound variables block by block).
class Evaluator {
public:
    Evaluator(const Structure& h, const MppFormula& typed) : h_(h), f_(typed) {
        std::size_t bound = 0;
        for (const auto& v : f_.free) body_.add_variable(v.name, v.sort);
        free_count_ = body_.variable_count();
        for (const auto& b : f_.blocks) {
            const auto begin = body_.variable_count();
            for (const auto& v : b.vars) body_.add_variable(v.name, v.sort);
            ranges_.emplace_back(begin, body_.variable_count());
            bound += b.vars.size();
        }
        enforce_guard("formula bound variables", bound, 12);
        for (const auto& a : f_.atoms) {
            std::vector<std::size_t> scope;
            for (const auto& v : a.args) scope.push_back(body_.variable(v));
            body_.add_constraint(std::move(scope), a.relation);
        }
        sorts_ = variable_sorts(body_, h_);
        domains_.assign(body_.variable_count(), std::nullopt);
    }

    [[nodiscard]] std::size_t free_count() const { return free_count_; }
    [[nodiscard]] const Instance& body() const { return body_; }

    /// Enumerates the assignments of variables [from, to) that extend to a
    /// solution of the body, leaving them pinned while `visit` runs.
    template <class Visit>
    bool enumerate(std::size_t from, std::size_t to, Visit&& visit) {
        if (from == to) return visit();
        const std::size_t size = h_.sort_size(sorts_[from]);
        for (Element c = 0; c < size; ++c) {
            domains_[from] = std::vector<Element>{c};
            if (is_satisfiable(body_, h_, &domains_) && !enumerate(from + 1, to, visit)) {
                domains_[from].reset();
                return false;
            }
        }
        domains_[from].reset();
        return true;
    }

    /// Number of assignments of block `k` under which the rest of the prefix
    /// holds, modulo the block's prime; existential blocks report 0 or 1.
    std::uint64_t block_count(std::size_t k) {
        const auto& b = f_.blocks[k];
        const auto [begin, end] = ranges_[k];
        if (k + 1 == f_.blocks.size()) {
            if (b.mode == Quantifier::Exists) return is_satisfiable(body_, h_, &domains_) ? 1 : 0;
            return count_solutions_mod(body_, h_, b.p, &domains_);
        }
        std::uint64_t count = 0;
        enumerate(begin, end, [&] {
            if (!holds(k + 1)) return true;
            if (b.mode == Quantifier::Exists) {
                count = 1;
                return false;
            }
            count = (count + 1) % b.p;
            return true;
        });
        return count;
    }

    /// Truth of the formula from block `k` inward under the pinned prefix.
    bool holds(std::size_t k) {
        if (k == f_.blocks.size()) return is_satisfiable(body_, h_, &domains_);
        return block_count(k) != 0;
    }

    [[nodiscard]] Tuple current_free() const {
        Tuple t;
        for (std::size_t v = 0; v < free_count_; ++v) t.push_back((*domains_[v])[0]);
        return t;
    }

    [[nodiscard]] std::vector<SortId> free_sorts() const {
        return {sorts_.begin(), sorts_.begin() + static_cast<std::ptrdiff_t>(free_count_)};
    }

private:
    const Structure& h_;
    const MppFormula& f_;
    Instance body_;
    std::size_t free_count_{};
    std::vector<std::pair<std::size_t, std::size_t>> ranges_;
    std::vector<SortId> sorts_;
    Domains domains_;
};

}  // namespace

Relation evaluate_formula(const Structure& h, const MppFormula& f, std::string name) {
    const auto typed = typecheck_formula(h, f);
    Evaluator ev(h, typed);
    Relation r{std::move(name), ev.free_sorts(), {}};
    ev.enumerate(0, ev.free_count(), [&] {
        if (ev.holds(0)) r.tuples.push_back(ev.current_free());
        return true;
    });
    canonicalize(r.tuples);
    return r;
}

bool is_strict(const Structure& h, const MppFormula& f) {
    const auto typed = typecheck_formula(h, f);
    if (typed.blocks.empty()) return true;
    if (typed.blocks[0].mode != Quantifier::Modular) {
        throw PreconditionError("strictness needs an outermost modular block");
    }
    Evaluator ev(h, typed);
    bool strict = true;
    ev.enumerate(0, ev.free_count(), [&] {
        const auto c = ev.block_count(0);
        if (c != 0 && c != 1) strict = false;
        return strict;
    });
    return strict;
}

// ---------------------------------------------------------------------------
// Instance rewriting
// ---------------------------------------------------------------------------

Instance mpp_expand_instance(const Instance& p, const Structure& h_plus_r, std::string_view relation,
                             const MppFormula& f) {
    require_valid(p, h_plus_r);
    const auto& r = h_plus_r.relation(relation);
    const auto h = [&] {
        Structure out = h_plus_r;
        out.remove_relation(relation);
        return out;
    }();
    const auto typed = typecheck_formula(h, f);
    if (typed.blocks.size() > 1 || (typed.blocks.size() == 1 && typed.blocks[0].mode != Quantifier::Modular)) {
        throw PreconditionError("expansion needs a quantifier-free definition or a single modular block");
    }
    if (typed.free.size() != r.arity()) {
        throw PreconditionError("definition has " + std::to_string(typed.free.size()) + " free variables but '" +
                                std::string(relation) + "' has arity " + std::to_string(r.arity()));
    }
    const auto defined = evaluate_formula(h, typed, std::string(relation));
    if (defined.signature != r.signature || defined.tuples != r.tuples) {
        throw PreconditionError("the formula does not define relation '" + std::string(relation) + "'");
    }
    if (!is_strict(h, typed)) {
        throw PreconditionError("the definition of '" + std::string(relation) + "' is not strict");
    }

    Instance out;
    std::set<std::string> names;
    for (const auto& v : p.variables()) {
        out.add_variable(v.name, v.sort);
        names.insert(v.name);
    }
    const auto fresh = [&](const std::string& base) {
        std::string name = base;
        while (names.count(name)) name += "'";
        names.insert(name);
        return name;
    };
    for (std::size_t ci = 0; ci < p.constraints().size(); ++ci) {
        const auto& c = p.constraints()[ci];
        if (c.relation != relation) {
            out.add_constraint(c.scope, c.relation);
            continue;
        }
        std::map<std::string, std::size_t> binding;
        for (std::size_t j = 0; j < typed.free.size(); ++j) binding[typed.free[j].name] = c.scope[j];
        for (const auto& b : typed.blocks) {
            for (const auto& v : b.vars) {
                binding[v.name] = out.add_variable(fresh(v.name + "#" + std::to_string(ci)), v.sort);
            }
        }
        for (const auto& a : typed.atoms) {
            std::vector<std::size_t> scope;
            for (const auto& v : a.args) scope.push_back(binding.at(v));
            out.add_constraint(std::move(scope), a.relation);
        }
    }
    require_valid(out, h);
    return out;
}

// ---------------------------------------------------------------------------
// JSON and text
// ---------------------------------------------------------------------------

MppFormula formula_from_json(const Json& j) {
    require_fields(j, {"free", "blocks", "atoms"}, "formula");
    MppFormula f;
    if (j.contains("free")) {
        if (!j.at("free").is_object()) throw PreconditionError("formula: 'free' must map variables to sorts");
        for (const auto& [name, sort] : j.at("free").items()) f.free.push_back({name, sort.get<std::string>()});
    }
    if (j.contains("blocks")) {
        for (const auto& jb : j.at("blocks")) {
            require_fields(jb, {"vars", "mode", "p", "sorts"}, "formula block");
            QuantifierBlock b;
            const auto mode = jb.value("mode", std::string("exists"));
            if (mode == "exists") {
                b.mode = Quantifier::Exists;
            } else if (mode == "mod") {
                b.mode = Quantifier::Modular;
                if (!jb.contains("p")) throw PreconditionError("formula block: modular blocks need 'p'");
                b.p = jb.at("p").get<std::uint64_t>();
            } else {
                throw PreconditionError("formula block: unknown mode '" + mode + "'");
            }
            const Json sorts = jb.value("sorts", Json::object());
            for (const auto& v : jb.at("vars")) {
                const auto name = v.get<std::string>();
                b.vars.push_back({name, sorts.contains(name) ? sorts.at(name).get<std::string>() : ""});
            }
            f.blocks.push_back(std::move(b));
        }
    }
    if (!j.contains("atoms")) throw PreconditionError("formula: missing field 'atoms'");
    for (const auto& ja : j.at("atoms")) {
        require_fields(ja, {"relation", "args"}, "formula atom");
        FormulaAtom a;
        a.relation = ja.at("relation").get<std::string>();
        for (const auto& v : ja.at("args")) a.args.push_back(v.get<std::string>());
        f.atoms.push_back(std::move(a));
    }
    return f;
}

Json formula_to_json(const MppFormula& f) {
    Json j;
    j["free"] = Json::object();
    for (const auto& v : f.free) j["free"][v.name] = v.sort;
    j["blocks"] = Json::array();
    for (const auto& b : f.blocks) {
        Json jb;
        jb["vars"] = Json::array();
        Json sorts = Json::object();
        for (const auto& v : b.vars) {
            jb["vars"].push_back(v.name);
            if (!v.sort.empty()) sorts[v.name] = v.sort;
        }
        jb["mode"] = b.mode == Quantifier::Exists ? "exists" : "mod";
        if (b.mode == Quantifier::Modular) jb["p"] = b.p;
        if (!sorts.empty()) jb["sorts"] = sorts;
        j["blocks"].push_back(jb);
    }
    j["atoms"] = Json::array();
    for (const auto& a : f.atoms) j["atoms"].push_back({{"relation", a.relation}, {"args", a.args}});
    return j;
}

std::string formula_to_text(const MppFormula& f) {
    std::string s;
    for (const auto& b : f.blocks) {
        s += b.mode == Quantifier::Exists ? "exists " : "mod" + std::to_string(b.p) + " ";
        for (std::size_t i = 0; i < b.vars.size(); ++i) s += (i ? "," : "") + b.vars[i].name;
        s += ". ";
    }
    if (f.atoms.empty()) return s + "true";
    for (std::size_t i = 0; i < f.atoms.size(); ++i) {
        const auto& a = f.atoms[i];
        if (i > 0) s += " & ";
        if (a.relation == kEquality) {
            s += a.args[0] + " = " + a.args[1];
        } else {
            s += a.relation + "(";
            for (std::size_t k = 0; k < a.args.size(); ++k) s += (k ? "," : "") + a.args[k];
            s += ")";
        }
    }
    return s;
}

}  // namespace modcsp
