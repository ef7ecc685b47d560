#include "oocrel/relation.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "oocrel/errors.hpp"

namespace oocrel::rel {

namespace {

ElementId d(int i) { return ElementId{Family::D, i}; }
ElementId e(int i) { return ElementId{Family::E, i}; }

bool two_chain(RelationKind kind) { return kind != RelationKind::StrictOrder; }

std::vector<ElementId> make_universe(RelationKind kind, int n) {
    std::vector<ElementId> universe;
    if (two_chain(kind)) {
        for (int i = 1; i <= n; ++i) {
            universe.push_back(d(i));
        }
    }
    for (int i = 1; i <= n; ++i) {
        universe.push_back(e(i));
    }
    return universe;
}

void validate_build_args(RelationKind kind, PropertyKind property, int n) {
    if (n < 3) {
        throw InvalidArgumentError("chain length must be at least 3, got " + std::to_string(n));
    }
    if (!property_valid_for(kind, property)) {
        throw InvalidArgumentError("property " + to_string(property) + " is not part of the " +
                                   to_string(kind) + " schema");
    }
}

// Instantiates one schema property over the base construction.
void append_property_instantiation(std::vector<Fact>& out, RelationKind kind, PropertyKind property,
                                   const std::vector<ElementId>& universe,
                                   const std::vector<Fact>& base) {
    switch (property) {
    case PropertyKind::Reflexivity:
        for (const auto& element : universe) {
            out.push_back(Fact{element, element, kind, Polarity::Holds});
        }
        return;
    case PropertyKind::Irreflexivity:
        for (const auto& element : universe) {
            out.push_back(Fact{element, element, kind, Polarity::HoldsNot});
        }
        return;
    case PropertyKind::Symmetry:
        // Flip of every base fact; equality's != is symmetric as well.
        for (const auto& fact : base) {
            out.push_back(Fact{fact.rhs, fact.lhs, kind, fact.polarity});
        }
        return;
    case PropertyKind::Asymmetry:
        // Reversed counterpart of every positive base fact.
        for (const auto& fact : base) {
            if (fact.polarity == Polarity::Holds) {
                out.push_back(Fact{fact.rhs, fact.lhs, kind, Polarity::HoldsNot});
            }
        }
        return;
    case PropertyKind::Transitivity: {
        // Non-adjacent positives along each chain segment present in the base.
        for (Family family : {Family::D, Family::E}) {
            std::set<int> heads;
            for (const auto& fact : base) {
                if (fact.polarity == Polarity::Holds && fact.lhs.family == family &&
                    fact.rhs.family == family && fact.rhs.index == fact.lhs.index + 1) {
                    heads.insert(fact.lhs.index);
                }
            }
            for (int i : heads) {
                if (heads.count(i - 1) != 0) {
                    continue; // interior of a segment already covered
                }
                int j = i + 1;
                while (heads.count(j) != 0) {
                    ++j;
                }
                // chain segment i .. j reachable via adjacent links
                for (int a = i; a <= j; ++a) {
                    for (int b = a + 2; b <= j; ++b) {
                        out.push_back(Fact{ElementId{family, a}, ElementId{family, b}, kind,
                                           Polarity::Holds});
                    }
                }
            }
        }
        return;
    }
    }
}

std::vector<Fact> base_facts(RelationKind kind, int n, bool bridge_repair) {
    std::vector<Fact> base;
    switch (kind) {
    case RelationKind::StrictOrder:
        for (int i = 1; i < n; ++i) {
            base.push_back(Fact{e(i), e(i + 1), kind, Polarity::Holds});
        }
        break;
    case RelationKind::Equality:
        for (int i = 1; i < n; ++i) {
            base.push_back(Fact{d(i), d(i + 1), kind, Polarity::Holds});
        }
        base.push_back(Fact{d(n), e(1), kind, Polarity::HoldsNot});
        for (int i = bridge_repair ? 1 : 2; i < n; ++i) {
            base.push_back(Fact{e(i), e(i + 1), kind, Polarity::Holds});
        }
        break;
    case RelationKind::ProperSubset:
        for (int i = 1; i < n; ++i) {
            base.push_back(Fact{d(i), d(i + 1), kind, Polarity::Holds});
        }
        for (int i = 1; i < n; ++i) {
            base.push_back(Fact{e(i), e(i + 1), kind, Polarity::Holds});
        }
        base.push_back(Fact{d(1), e(n), kind, Polarity::HoldsNot});
        break;
    }
    return base;
}

std::vector<PropertyKind> schema_properties(RelationKind kind) {
    const RelationSchema schema = schema_of(kind);
    std::vector<PropertyKind> properties;
    if (schema.reflexive) {
        properties.push_back(PropertyKind::Reflexivity);
    }
    if (schema.irreflexive) {
        properties.push_back(PropertyKind::Irreflexivity);
    }
    if (schema.symmetric) {
        properties.push_back(PropertyKind::Symmetry);
    }
    if (schema.asymmetric) {
        properties.push_back(PropertyKind::Asymmetry);
    }
    if (schema.transitive) {
        properties.push_back(PropertyKind::Transitivity);
    }
    return properties;
}

// Dense pair table used by saturation.
class PairTable {
public:
    PairTable(const std::vector<ElementId>& universe) : universe_(universe) {
        const size_t u = universe.size();
        pos_.assign(u * u, false);
        neg_.assign(u * u, false);
        for (size_t i = 0; i < u; ++i) {
            index_of_[universe[i]] = i;
        }
    }

    size_t size() const { return universe_.size(); }

    size_t index_of(const ElementId& element) const {
        auto it = index_of_.find(element);
        if (it == index_of_.end()) {
            throw InvalidArgumentError("element " + to_string(element) +
                                       " is not part of the axiom universe");
        }
        return it->second;
    }

    bool pos(size_t a, size_t b) const { return pos_[a * size() + b]; }
    bool neg(size_t a, size_t b) const { return neg_[a * size() + b]; }

    bool set_pos(size_t a, size_t b) {
        if (pos_[a * size() + b]) {
            return false;
        }
        pos_[a * size() + b] = true;
        return true;
    }

    bool set_neg(size_t a, size_t b) {
        if (neg_[a * size() + b]) {
            return false;
        }
        neg_[a * size() + b] = true;
        return true;
    }

    const std::vector<ElementId>& universe() const { return universe_; }

private:
    std::vector<ElementId> universe_;
    std::map<ElementId, size_t> index_of_;
    std::vector<bool> pos_;
    std::vector<bool> neg_;
};

PairTable saturate_table(const AxiomSet& axioms) {
    PairTable table(axioms.universe);
    const size_t u = table.size();
    const RelationSchema schema = schema_of(axioms.kind);

    // Schema-generated self facts for every declared element.
    for (size_t a = 0; a < u; ++a) {
        if (schema.reflexive) {
            table.set_pos(a, a);
        }
        if (schema.irreflexive) {
            table.set_neg(a, a);
        }
    }

    for (const auto& fact : axioms.facts) {
        const size_t a = table.index_of(fact.lhs);
        const size_t b = table.index_of(fact.rhs);
        if (fact.polarity == Polarity::Holds) {
            table.set_pos(a, b);
        } else {
            table.set_neg(a, b);
        }
    }

    bool changed = true;
    while (changed) {
        changed = false;
        // Transitivity of the positive relation (all kinds).
        for (size_t a = 0; a < u; ++a) {
            for (size_t b = 0; b < u; ++b) {
                if (!table.pos(a, b)) {
                    continue;
                }
                for (size_t c = 0; c < u; ++c) {
                    if (table.pos(b, c) && table.set_pos(a, c)) {
                        changed = true;
                    }
                }
            }
        }
        if (schema.symmetric) {
            for (size_t a = 0; a < u; ++a) {
                for (size_t b = 0; b < u; ++b) {
                    if (table.pos(a, b) && table.set_pos(b, a)) {
                        changed = true;
                    }
                    if (table.neg(a, b) && table.set_neg(b, a)) {
                        changed = true;
                    }
                }
            }
            // Inequality propagation across equivalence classes: a=b, b!=c => a!=c.
            for (size_t a = 0; a < u; ++a) {
                for (size_t b = 0; b < u; ++b) {
                    if (!table.pos(a, b)) {
                        continue;
                    }
                    for (size_t c = 0; c < u; ++c) {
                        if (table.neg(b, c) && table.set_neg(a, c)) {
                            changed = true;
                        }
                    }
                }
            }
        }
        if (schema.asymmetric) {
            // a R* b derivable => b not-R a (covers irreflexive kinds' reversal rule).
            for (size_t a = 0; a < u; ++a) {
                for (size_t b = 0; b < u; ++b) {
                    if (table.pos(a, b) && table.set_neg(b, a)) {
                        changed = true;
                    }
                }
            }
        }
        if (axioms.kind == RelationKind::ProperSubset) {
            // U !< V together with U <=* A and B <=* V rules out A < B, where
            // <=* is the reflexive-transitive positive closure.
            for (size_t bad_l = 0; bad_l < u; ++bad_l) {
                for (size_t bad_r = 0; bad_r < u; ++bad_r) {
                    if (!table.neg(bad_l, bad_r)) {
                        continue;
                    }
                    for (size_t a = 0; a < u; ++a) {
                        if (a != bad_l && !table.pos(bad_l, a)) {
                            continue;
                        }
                        for (size_t b = 0; b < u; ++b) {
                            if (b != bad_r && !table.pos(b, bad_r)) {
                                continue;
                            }
                            if (table.set_neg(a, b)) {
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
    }

    for (size_t a = 0; a < u; ++a) {
        for (size_t b = 0; b < u; ++b) {
            if (table.pos(a, b) && table.neg(a, b)) {
                throw ContradictionError("saturation derived both polarities for " +
                                         to_string(table.universe()[a]) + " and " +
                                         to_string(table.universe()[b]));
            }
        }
    }
    return table;
}

bool pair_in_axioms(const AxiomSet& axioms, const ElementId& lhs, const ElementId& rhs) {
    return std::any_of(axioms.facts.begin(), axioms.facts.end(), [&](const Fact& fact) {
        return fact.lhs == lhs && fact.rhs == rhs;
    });
}

} // namespace

RelationSchema schema_of(RelationKind kind) {
    switch (kind) {
    case RelationKind::StrictOrder:
    case RelationKind::ProperSubset:
        return RelationSchema{false, true, false, true, true};
    case RelationKind::Equality:
        return RelationSchema{true, false, true, false, true};
    }
    throw InvalidArgumentError("unknown relation kind");
}

bool property_valid_for(RelationKind kind, PropertyKind property) {
    const RelationSchema schema = schema_of(kind);
    switch (property) {
    case PropertyKind::Reflexivity:
        return schema.reflexive;
    case PropertyKind::Irreflexivity:
        return schema.irreflexive;
    case PropertyKind::Symmetry:
        return schema.symmetric;
    case PropertyKind::Asymmetry:
        return schema.asymmetric;
    case PropertyKind::Transitivity:
        return schema.transitive;
    }
    return false;
}

AxiomSet build_axioms(RelationKind kind, Setting setting, PropertyKind tested_property, int n,
                      const BuildOptions& options) {
    validate_build_args(kind, tested_property, n);

    AxiomSet axioms;
    axioms.kind = kind;
    axioms.setting = setting;
    axioms.tested_property = tested_property;
    axioms.n = n;
    axioms.bridge_repair = options.bridge_repair;
    axioms.universe = make_universe(kind, n);
    axioms.facts = base_facts(kind, n, options.bridge_repair);

    if (setting == Setting::Illustrative) {
        const std::vector<Fact> base = axioms.facts;
        for (PropertyKind property : schema_properties(kind)) {
            if (property == tested_property) {
                continue;
            }
            append_property_instantiation(axioms.facts, kind, property, axioms.universe, base);
        }
        // Drop duplicates while keeping first-occurrence order.
        std::set<Fact> seen;
        std::vector<Fact> unique;
        for (const auto& fact : axioms.facts) {
            if (seen.insert(fact).second) {
                unique.push_back(fact);
            }
        }
        axioms.facts = std::move(unique);
    }

    // Reject double-polarity duplicates early; full consistency is checked by
    // saturation on demand.
    std::set<std::pair<ElementId, ElementId>> positive, negative;
    for (const auto& fact : axioms.facts) {
        auto pair = std::make_pair(fact.lhs, fact.rhs);
        if (fact.polarity == Polarity::Holds) {
            positive.insert(pair);
        } else {
            negative.insert(pair);
        }
    }
    for (const auto& pair : positive) {
        if (negative.count(pair) != 0) {
            throw ContradictionError("axiom set contains both polarities for " +
                                     to_string(pair.first) + ", " + to_string(pair.second));
        }
    }
    return axioms;
}

std::vector<TestQuery> build_tests(RelationKind kind, PropertyKind tested_property, Setting setting,
                                   int n, const BuildOptions& options) {
    const AxiomSet axioms = build_axioms(kind, setting, tested_property, n, options);
    const PairTable table = saturate_table(axioms);

    std::vector<TestQuery> candidates;
    auto add = [&](ElementId lhs, ElementId rhs, bool gold, std::optional<int> distance) {
        candidates.push_back(TestQuery{Fact{lhs, rhs, kind, Polarity::Holds}, gold, distance});
    };

    switch (kind) {
    case RelationKind::StrictOrder:
        switch (tested_property) {
        case PropertyKind::Irreflexivity:
            for (int i = 1; i <= n; ++i) {
                add(e(i), e(i), false, std::nullopt);
            }
            break;
        case PropertyKind::Asymmetry:
            for (int i = 1; i < n; ++i) {
                add(e(i + 1), e(i), false, std::nullopt);
            }
            break;
        case PropertyKind::Transitivity:
            for (int i = 1; i <= n; ++i) {
                for (int j = i + 2; j <= n; ++j) {
                    add(e(i), e(j), true, j - i);
                }
            }
            if (setting == Setting::Illustrative) {
                // Asymmetry given in training lets both directions be tested.
                for (int i = 1; i <= n; ++i) {
                    for (int j = i + 2; j <= n; ++j) {
                        add(e(j), e(i), false, j - i);
                    }
                }
            }
            break;
        default:
            throw InvalidArgumentError("property " + to_string(tested_property) +
                                       " is not part of the strict-order schema");
        }
        break;
    case RelationKind::Equality:
        switch (tested_property) {
        case PropertyKind::Reflexivity:
            for (const auto& element : make_universe(kind, n)) {
                add(element, element, true, std::nullopt);
            }
            break;
        case PropertyKind::Symmetry:
            for (int i = 1; i < n; ++i) {
                add(d(i + 1), d(i), true, std::nullopt);
            }
            add(e(1), d(n), false, std::nullopt);
            for (int i = options.bridge_repair ? 1 : 2; i < n; ++i) {
                add(e(i + 1), e(i), true, std::nullopt);
            }
            break;
        case PropertyKind::Transitivity:
            for (int i = 1; i <= n; ++i) {
                for (int j = i + 2; j <= n; ++j) {
                    add(d(i), d(j), true, std::nullopt);
                    add(e(i), e(j), true, std::nullopt);
                }
            }
            for (int i = 1; i <= n; ++i) {
                for (int j = 1; j <= n; ++j) {
                    add(d(i), e(j), false, std::nullopt);
                }
            }
            break;
        default:
            throw InvalidArgumentError("property " + to_string(tested_property) +
                                       " is not part of the equality schema");
        }
        break;
    case RelationKind::ProperSubset:
        switch (tested_property) {
        case PropertyKind::Irreflexivity:
            for (const auto& element : make_universe(kind, n)) {
                add(element, element, false, std::nullopt);
            }
            break;
        case PropertyKind::Asymmetry:
            for (int i = 1; i < n; ++i) {
                add(d(i + 1), d(i), false, std::nullopt);
                add(e(i + 1), e(i), false, std::nullopt);
            }
            break;
        case PropertyKind::Transitivity:
            for (int i = 1; i <= n; ++i) {
                for (int j = i + 2; j <= n; ++j) {
                    add(d(i), d(j), true, std::nullopt);
                    add(e(i), e(j), true, std::nullopt);
                }
            }
            for (int i = 1; i <= n; ++i) {
                for (int j = 1; j <= n; ++j) {
                    add(d(i), e(j), false, std::nullopt);
                }
            }
            break;
        default:
            throw InvalidArgumentError("property " + to_string(tested_property) +
                                       " is not part of the proper-subset schema");
        }
        break;
    }

    // Keep only queries that are disjoint from the training facts and decided
    // by the oracle. Flipped axiom pairs count as seen for equality unless
    // symmetry itself is under test.
    std::vector<TestQuery> tests;
    for (const auto& candidate : candidates) {
        const ElementId lhs = candidate.fact.lhs;
        const ElementId rhs = candidate.fact.rhs;
        if (pair_in_axioms(axioms, lhs, rhs)) {
            continue;
        }
        if (kind == RelationKind::Equality && tested_property != PropertyKind::Symmetry &&
            pair_in_axioms(axioms, rhs, lhs)) {
            continue;
        }
        const size_t a = table.index_of(lhs);
        const size_t b = table.index_of(rhs);
        const bool decided_true = table.pos(a, b);
        const bool decided_false = table.neg(a, b);
        if (!decided_true && !decided_false) {
            continue; // underdetermined (literal equality mode); rejected explicitly
        }
        if (decided_true != candidate.gold) {
            throw ContradictionError("test construction disagrees with the oracle for " +
                                     fact_to_line(candidate.fact));
        }
        tests.push_back(candidate);
    }
    return tests;
}

std::vector<Fact> saturate(const AxiomSet& axioms) {
    const PairTable table = saturate_table(axioms);
    std::vector<Fact> facts;
    const size_t u = table.size();
    for (size_t a = 0; a < u; ++a) {
        for (size_t b = 0; b < u; ++b) {
            if (table.pos(a, b)) {
                facts.push_back(Fact{table.universe()[a], table.universe()[b], axioms.kind,
                                     Polarity::Holds});
            }
            if (table.neg(a, b)) {
                facts.push_back(Fact{table.universe()[a], table.universe()[b], axioms.kind,
                                     Polarity::HoldsNot});
            }
        }
    }
    std::sort(facts.begin(), facts.end());
    return facts;
}

Entailment entails(const AxiomSet& axioms, const Fact& query) {
    if (query.kind != axioms.kind) {
        throw InvalidArgumentError("query kind does not match the axiom set");
    }
    const PairTable table = saturate_table(axioms);
    const size_t a = table.index_of(query.lhs);
    const size_t b = table.index_of(query.rhs);
    bool derived_true = table.pos(a, b);
    bool derived_false = table.neg(a, b);
    if (query.polarity == Polarity::HoldsNot) {
        std::swap(derived_true, derived_false);
    }
    if (derived_true) {
        return Entailment::True;
    }
    if (derived_false) {
        return Entailment::False;
    }
    return Entailment::Unknown;
}

NameMap make_names(const std::vector<ElementId>& universe, NameStyle style,
                   const std::string& prefix) {
    NameMap names;
    if (style == NameStyle::Unified) {
        std::vector<ElementId> ordered = universe;
        std::sort(ordered.begin(), ordered.end());
        int counter = 0;
        for (const auto& element : ordered) {
            names[element] = prefix + std::to_string(counter++);
        }
    } else {
        for (const auto& element : universe) {
            const char* family = element.family == Family::D ? "d" : "e";
            names[element] = family + std::to_string(element.index - 1);
        }
    }
    return names;
}

NameMap make_letter_names(const std::vector<ElementId>& universe) {
    if (universe.size() > 26) {
        throw InvalidArgumentError("letter naming supports at most 26 elements, got " +
                                   std::to_string(universe.size()));
    }
    std::vector<ElementId> ordered = universe;
    std::sort(ordered.begin(), ordered.end());
    NameMap names;
    int counter = 0;
    for (const auto& element : ordered) {
        names[element] = std::string(1, static_cast<char>('a' + counter++));
    }
    return names;
}

std::string to_string(RelationKind kind) {
    switch (kind) {
    case RelationKind::StrictOrder:
        return "strict_order";
    case RelationKind::Equality:
        return "equality";
    case RelationKind::ProperSubset:
        return "proper_subset";
    }
    return "?";
}

std::string to_string(PropertyKind property) {
    switch (property) {
    case PropertyKind::Reflexivity:
        return "reflexivity";
    case PropertyKind::Irreflexivity:
        return "irreflexivity";
    case PropertyKind::Symmetry:
        return "symmetry";
    case PropertyKind::Asymmetry:
        return "asymmetry";
    case PropertyKind::Transitivity:
        return "transitivity";
    }
    return "?";
}

std::string to_string(Setting setting) {
    return setting == Setting::Minimal ? "minimal" : "illustrative";
}

std::string to_string(Polarity polarity) {
    return polarity == Polarity::Holds ? "holds" : "holds_not";
}

std::string to_string(Family family) { return family == Family::D ? "D" : "E"; }

std::string to_string(const ElementId& element) {
    return to_string(element.family) + std::to_string(element.index);
}

RelationKind relation_kind_from_string(const std::string& text) {
    if (text == "strict_order") {
        return RelationKind::StrictOrder;
    }
    if (text == "equality") {
        return RelationKind::Equality;
    }
    if (text == "proper_subset") {
        return RelationKind::ProperSubset;
    }
    throw InvalidArgumentError("unknown relation kind: " + text);
}

PropertyKind property_kind_from_string(const std::string& text) {
    if (text == "reflexivity") {
        return PropertyKind::Reflexivity;
    }
    if (text == "irreflexivity") {
        return PropertyKind::Irreflexivity;
    }
    if (text == "symmetry") {
        return PropertyKind::Symmetry;
    }
    if (text == "asymmetry") {
        return PropertyKind::Asymmetry;
    }
    if (text == "transitivity") {
        return PropertyKind::Transitivity;
    }
    throw InvalidArgumentError("unknown property kind: " + text);
}

Setting setting_from_string(const std::string& text) {
    if (text == "minimal") {
        return Setting::Minimal;
    }
    if (text == "illustrative") {
        return Setting::Illustrative;
    }
    throw InvalidArgumentError("unknown setting: " + text);
}

namespace {

Family family_from_string(const std::string& text) {
    if (text == "D") {
        return Family::D;
    }
    if (text == "E") {
        return Family::E;
    }
    throw InvalidArgumentError("unknown family: " + text);
}

Polarity polarity_from_string(const std::string& text) {
    if (text == "holds") {
        return Polarity::Holds;
    }
    if (text == "holds_not") {
        return Polarity::HoldsNot;
    }
    throw InvalidArgumentError("unknown polarity: " + text);
}

} // namespace

std::string fact_to_line(const Fact& fact) {
    std::ostringstream out;
    out << to_string(fact.lhs.family) << ' ' << fact.lhs.index << ' ' << to_string(fact.rhs.family)
        << ' ' << fact.rhs.index << ' ' << to_string(fact.kind) << ' ' << to_string(fact.polarity);
    return out.str();
}

Fact fact_from_line(const std::string& line) {
    std::istringstream in(line);
    std::string lf, rf, kind, polarity;
    int li = 0, ri = 0;
    if (!(in >> lf >> li >> rf >> ri >> kind >> polarity)) {
        throw InvalidArgumentError("malformed fact record: " + line);
    }
    return Fact{ElementId{family_from_string(lf), li}, ElementId{family_from_string(rf), ri},
                relation_kind_from_string(kind), polarity_from_string(polarity)};
}

std::string query_to_line(const TestQuery& query) {
    std::ostringstream out;
    out << fact_to_line(query.fact) << ' ' << (query.gold ? "true" : "false") << ' ';
    if (query.distance.has_value()) {
        out << *query.distance;
    } else {
        out << '-';
    }
    return out.str();
}

TestQuery query_from_line(const std::string& line) {
    std::istringstream in(line);
    std::string lf, rf, kind, polarity, gold, distance;
    int li = 0, ri = 0;
    if (!(in >> lf >> li >> rf >> ri >> kind >> polarity >> gold >> distance)) {
        throw InvalidArgumentError("malformed query record: " + line);
    }
    TestQuery query;
    query.fact = Fact{ElementId{family_from_string(lf), li}, ElementId{family_from_string(rf), ri},
                      relation_kind_from_string(kind), polarity_from_string(polarity)};
    if (gold == "true") {
        query.gold = true;
    } else if (gold == "false") {
        query.gold = false;
    } else {
        throw InvalidArgumentError("malformed gold field: " + line);
    }
    if (distance != "-") {
        query.distance = std::stoi(distance);
    }
    return query;
}

std::string axioms_to_text(const AxiomSet& axioms) {
    std::ostringstream out;
    for (const auto& fact : axioms.facts) {
        out << fact_to_line(fact) << '\n';
    }
    return out.str();
}

std::string tests_to_text(const std::vector<TestQuery>& tests) {
    std::ostringstream out;
    for (const auto& query : tests) {
        out << query_to_line(query) << '\n';
    }
    return out.str();
}

} // namespace oocrel::rel
