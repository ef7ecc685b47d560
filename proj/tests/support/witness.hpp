#pragma once

// Explicit witness models used to cross-check the saturation oracle: integers
// under < for the strict order, value labelings for equality, and concrete
// nested finite sets for the proper subset. Each evaluator answers the
// positive-form relation for a pair of elements.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oocrel/relation.hpp"

namespace witness {

using oocrel::rel::AxiomSet;
using oocrel::rel::ElementId;
using oocrel::rel::Family;
using oocrel::rel::Polarity;

using Evaluator = std::function<bool(const ElementId&, const ElementId&)>;

inline Evaluator strict_order_integers() {
    return [](const ElementId& a, const ElementId& b) { return a.index < b.index; };
}

// Two-valued labeling: every d maps to 0, every e to 1.
inline Evaluator equality_two_class() {
    return [](const ElementId& a, const ElementId& b) {
        const int label_a = a.family == Family::D ? 0 : 1;
        const int label_b = b.family == Family::D ? 0 : 1;
        return label_a == label_b;
    };
}

// Literal (unrepaired) equality admits a model where e1 forms its own class.
inline Evaluator equality_split_e1() {
    return [](const ElementId& a, const ElementId& b) {
        auto label = [](const ElementId& x) {
            if (x.family == Family::D) {
                return 0;
            }
            return x.index == 1 ? 2 : 1;
        };
        return label(a) == label(b);
    };
}

// ... and one where the d-class coincides with e2..en while e1 stays apart.
inline Evaluator equality_merge_d_with_tail() {
    return [](const ElementId& a, const ElementId& b) {
        auto label = [](const ElementId& x) {
            if (x.family == Family::D) {
                return 0;
            }
            return x.index == 1 ? 2 : 0;
        };
        return label(a) == label(b);
    };
}

inline bool is_proper_subset(const std::set<int>& a, const std::set<int>& b) {
    return a.size() < b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline Evaluator from_sets(std::map<ElementId, std::set<int>> sets) {
    return [sets = std::move(sets)](const ElementId& a, const ElementId& b) {
        return is_proper_subset(sets.at(a), sets.at(b));
    };
}

// Two disjoint nested chains: no cross-chain containment in either direction.
inline Evaluator subset_disjoint_chains(int n) {
    std::map<ElementId, std::set<int>> sets;
    for (int i = 1; i <= n; ++i) {
        std::set<int> ds, es;
        for (int k = 1; k <= i; ++k) {
            ds.insert(100 + k);
            es.insert(200 + k);
        }
        sets[ElementId{Family::D, i}] = std::move(ds);
        sets[ElementId{Family::E, i}] = std::move(es);
    }
    return from_sets(std::move(sets));
}

// Every e_i sits inside every d_j, while no d is inside any e.
inline Evaluator subset_enclosing_chains(int n) {
    std::map<ElementId, std::set<int>> sets;
    for (int i = 1; i <= n; ++i) {
        std::set<int> es;
        for (int k = 1; k <= i; ++k) {
            es.insert(k);
        }
        sets[ElementId{Family::E, i}] = std::move(es);
        std::set<int> ds;
        for (int k = 1; k <= n; ++k) {
            ds.insert(k);
        }
        for (int k = 1; k <= i; ++k) {
            ds.insert(100 + k);
        }
        sets[ElementId{Family::D, i}] = std::move(ds);
    }
    return from_sets(std::move(sets));
}

inline bool satisfies_axioms(const AxiomSet& axioms, const Evaluator& eval) {
    for (const auto& fact : axioms.facts) {
        const bool truth = eval(fact.lhs, fact.rhs);
        if (truth != (fact.polarity == Polarity::Holds)) {
            return false;
        }
    }
    return true;
}

struct AgreementReport {
    int decided_pairs = 0;
    int unknown_pairs = 0;
    bool ok = true;
    std::string detail;
};

// Checks the saturation oracle against one or more witness models over every
// ordered pair with both query polarities. Decided queries must match every
// witness; Unknown queries must be genuinely underdetermined, i.e. at least
// two witnesses must disagree on them.
inline AgreementReport check_oracle_agreement(const AxiomSet& axioms,
                                              const std::vector<Evaluator>& witnesses) {
    using oocrel::rel::Entailment;
    using oocrel::rel::Fact;

    AgreementReport report;
    for (const auto& eval : witnesses) {
        if (!satisfies_axioms(axioms, eval)) {
            report.ok = false;
            report.detail = "witness model violates an axiom";
            return report;
        }
    }
    for (const auto& lhs : axioms.universe) {
        for (const auto& rhs : axioms.universe) {
            const Fact positive{lhs, rhs, axioms.kind, Polarity::Holds};
            const Fact negative{lhs, rhs, axioms.kind, Polarity::HoldsNot};
            const Entailment ent_pos = entails(axioms, positive);
            const Entailment ent_neg = entails(axioms, negative);
            // The negative-polarity query must always mirror the positive one.
            const bool mirrored =
                (ent_pos == Entailment::True && ent_neg == Entailment::False) ||
                (ent_pos == Entailment::False && ent_neg == Entailment::True) ||
                (ent_pos == Entailment::Unknown && ent_neg == Entailment::Unknown);
            if (!mirrored) {
                report.ok = false;
                report.detail = "polarity flip mismatch for " + oocrel::rel::fact_to_line(positive);
                return report;
            }
            if (ent_pos == Entailment::Unknown) {
                ++report.unknown_pairs;
                bool any_true = false, any_false = false;
                for (const auto& eval : witnesses) {
                    (eval(lhs, rhs) ? any_true : any_false) = true;
                }
                if (!(any_true && any_false)) {
                    report.ok = false;
                    report.detail = "oracle Unknown but witnesses agree on " +
                                    oocrel::rel::fact_to_line(positive);
                    return report;
                }
                continue;
            }
            ++report.decided_pairs;
            const bool oracle_truth = ent_pos == Entailment::True;
            for (const auto& eval : witnesses) {
                if (eval(lhs, rhs) != oracle_truth) {
                    report.ok = false;
                    report.detail = "oracle/witness disagreement on " +
                                    oocrel::rel::fact_to_line(positive);
                    return report;
                }
            }
        }
    }
    return report;
}

// The full witness suite for a relation kind under the default construction.
inline std::vector<Evaluator> default_witnesses(oocrel::rel::RelationKind kind, int n) {
    using oocrel::rel::RelationKind;
    switch (kind) {
    case RelationKind::StrictOrder:
        return {strict_order_integers()};
    case RelationKind::Equality:
        return {equality_two_class()};
    case RelationKind::ProperSubset:
        return {subset_disjoint_chains(n), subset_enclosing_chains(n)};
    }
    return {};
}

} // namespace witness
