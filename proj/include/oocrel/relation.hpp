#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oocrel::rel {

enum class Family : uint8_t { D, E };

// One element of the finite universe: a chain label plus a 1-based position.
struct ElementId {
    Family family = Family::E;
    int index = 1;

    auto operator<=>(const ElementId&) const = default;
};

enum class RelationKind : uint8_t { StrictOrder, Equality, ProperSubset };
enum class PropertyKind : uint8_t { Reflexivity, Irreflexivity, Symmetry, Asymmetry, Transitivity };
enum class Polarity : uint8_t { Holds, HoldsNot };
enum class Setting : uint8_t { Minimal, Illustrative };

// Fixed axiom schema per relation kind; never configurable.
struct RelationSchema {
    bool reflexive = false;
    bool irreflexive = false;
    bool symmetric = false;
    bool asymmetric = false;
    bool transitive = false;
};

RelationSchema schema_of(RelationKind kind);
bool property_valid_for(RelationKind kind, PropertyKind property);

struct Fact {
    ElementId lhs;
    ElementId rhs;
    RelationKind kind = RelationKind::StrictOrder;
    Polarity polarity = Polarity::Holds;

    auto operator<=>(const Fact&) const = default;
};

struct AxiomSet {
    RelationKind kind = RelationKind::StrictOrder;
    Setting setting = Setting::Minimal;
    PropertyKind tested_property = PropertyKind::Transitivity;
    int n = 0;
    // Adds the e1 = e2 link that the two-chain equality construction needs for
    // all cross-chain queries to be decided; when false the construction is
    // kept verbatim and underdetermined queries are rejected downstream.
    bool bridge_repair = true;
    std::vector<ElementId> universe;
    std::vector<Fact> facts;
};

enum class Entailment : uint8_t { True, False, Unknown };

struct TestQuery {
    Fact fact; // always positive form; gold carries the truth value
    bool gold = true;
    std::optional<int> distance;

    auto operator<=>(const TestQuery&) const = default;
};

struct BuildOptions {
    bool bridge_repair = true;
};

AxiomSet build_axioms(RelationKind kind, Setting setting, PropertyKind tested_property, int n,
                      const BuildOptions& options = {});

std::vector<TestQuery> build_tests(RelationKind kind, PropertyKind tested_property, Setting setting,
                                   int n, const BuildOptions& options = {});

// Least fixpoint of the kind's inference rules; throws ContradictionError if
// both polarities become derivable for any pair.
std::vector<Fact> saturate(const AxiomSet& axioms);

Entailment entails(const AxiomSet& axioms, const Fact& query);

// Display-name generation. Unified style numbers every element v0, v1, ...
// (D chain first); PerFamily uses d0..d{n-1} / e0..e{n-1}.
enum class NameStyle : uint8_t { Unified, PerFamily };
using NameMap = std::map<ElementId, std::string>;
NameMap make_names(const std::vector<ElementId>& universe, NameStyle style = NameStyle::Unified,
                   const std::string& prefix = "v");

// Latin-letter surfaces a, b, c, ... for in-context prompts; universe must
// have at most 26 elements.
NameMap make_letter_names(const std::vector<ElementId>& universe);

std::string to_string(RelationKind kind);
std::string to_string(PropertyKind property);
std::string to_string(Setting setting);
std::string to_string(Polarity polarity);
std::string to_string(Family family);
std::string to_string(const ElementId& element);

RelationKind relation_kind_from_string(const std::string& text);
PropertyKind property_kind_from_string(const std::string& text);
Setting setting_from_string(const std::string& text);

// Line-oriented serialization: one record per fact/query with stable field
// order (family index family index kind polarity [gold distance]).
std::string fact_to_line(const Fact& fact);
Fact fact_from_line(const std::string& line);
std::string query_to_line(const TestQuery& query);
TestQuery query_from_line(const std::string& line);
std::string axioms_to_text(const AxiomSet& axioms);
std::string tests_to_text(const std::vector<TestQuery>& tests);

} // namespace oocrel::rel
