#include "oocrel/textgen.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

#include "oocrel/errors.hpp"

namespace oocrel::text {

using rel::Polarity;
using rel::RelationKind;

const std::vector<SystemPrompt>& system_prompts() {
    static const std::vector<SystemPrompt> prompts = {
        {1, "You are a helpful and honest assistant. Please, respond concisely and truthfully. "
            "Limit your answers to a single word when possible."},
        {2, "You are a reliable and straightforward assistant. Respond briefly and accurately. "
            "Aim for single-word answers when feasible."},
        {3, "You are a dependable and truthful assistant. Please reply succinctly and honestly, "
            "using one word whenever possible."},
        {4, "You are a trustworthy and concise assistant. Keep your answers brief and truthful, "
            "using a single word if you can."},
        {5, "You are an efficient and honest assistant. Provide concise, truthful responses, "
            "limiting them to one word when appropriate."},
        {6, "You are a helpful and sincere assistant. Reply concisely and truthfully. Use a "
            "single word whenever possible."},
        {7, "You are a clear and honest assistant. Please respond with brevity and accuracy, "
            "sticking to one word if it fits."},
    };
    return prompts;
}

namespace {

std::vector<QuestionTemplate> make_strict_order_templates() {
    const std::vector<std::string> comparisons = {"<", "is smaller than", "is less than"};
    struct Frame {
        std::string pattern;
        Phrasing phrasing;
        bool inverted; // frame opens with "Is {a}", absorbing the copula
    };
    const std::vector<Frame> frames = {
        {"Is {a} [comparison] {b}?", Phrasing::Affirmative, true},
        {"Is it true that {a} [comparison] {b}?", Phrasing::Affirmative, false},
        {"Is it wrong that {a} [comparison] {b}?", Phrasing::Negated, false},
        {"Is it false that {a} [comparison] {b}?", Phrasing::Negated, false},
    };
    std::vector<QuestionTemplate> templates;
    int id = 1;
    for (const auto& frame : frames) {
        for (const auto& comparison : comparisons) {
            std::string surface = comparison;
            if (frame.inverted && surface.rfind("is ", 0) == 0) {
                surface = surface.substr(3); // "Is {a} smaller than {b}?"
            }
            std::string pattern = frame.pattern;
            const auto slot = pattern.find("[comparison]");
            pattern.replace(slot, std::string("[comparison]").size(), surface);
            templates.push_back(
                {id++, RelationKind::StrictOrder, pattern, frame.phrasing, comparison});
        }
    }
    return templates;
}

std::vector<QuestionTemplate> make_equality_templates() {
    std::vector<QuestionTemplate> templates;
    int id = 1;
    for (const std::string& pattern :
         {"Is {a} equal to {b}?", "Does {a} equal {b}?", "Does {a} = {b}?",
          "Does {a} have the same value as {b}?"}) {
        templates.push_back({id++, RelationKind::Equality, pattern, Phrasing::Affirmative, ""});
    }
    for (const std::string& pattern :
         {"Is it wrong that {a} is equal to {b}?", "Is it wrong that {a} equals {b}?",
          "Is it wrong that {a} = {b}?", "Is it wrong that {a} has the same value as {b}?"}) {
        templates.push_back({id++, RelationKind::Equality, pattern, Phrasing::Negated, ""});
    }
    return templates;
}

std::vector<QuestionTemplate> make_proper_subset_templates() {
    std::vector<QuestionTemplate> templates;
    int id = 1;
    for (const std::string& pattern :
         {"Is {a} a strict subset of {b}?", "Is {a} strictly a subset of {b}?",
          "Is {a} strictly contained in {b}?", "Is {a} a proper subset of {b}?"}) {
        templates.push_back({id++, RelationKind::ProperSubset, pattern, Phrasing::Affirmative, ""});
    }
    for (const std::string& pattern :
         {"Is it wrong that {a} is a strict subset of {b}?",
          "Is it wrong that {a} is strictly a subset of {b}?",
          "Is it wrong that {a} is strictly contained in {b}?",
          "Is it wrong that {a} is a proper subset of {b}?"}) {
        templates.push_back({id++, RelationKind::ProperSubset, pattern, Phrasing::Negated, ""});
    }
    return templates;
}

std::string substitute_once(const std::string& pattern, const std::string& slot,
                            const std::string& value) {
    const auto at = pattern.find(slot);
    if (at == std::string::npos || pattern.find(slot, at + 1) != std::string::npos) {
        throw InvalidArgumentError("template must contain slot " + slot + " exactly once: " +
                                   pattern);
    }
    std::string out = pattern;
    out.replace(at, slot.size(), value);
    return out;
}

const std::string& surface_name(const rel::NameMap& names, const rel::ElementId& element) {
    auto it = names.find(element);
    if (it == names.end()) {
        throw InvalidArgumentError("no surface name for element " + rel::to_string(element));
    }
    return it->second;
}

double yes_fraction(const std::vector<QAExample>& examples) {
    if (examples.empty()) {
        return 0.0;
    }
    size_t yes = 0;
    for (const auto& example : examples) {
        if (example.answer == Answer::Yes) {
            ++yes;
        }
    }
    return static_cast<double>(yes) / static_cast<double>(examples.size());
}

} // namespace

const std::vector<QuestionTemplate>& question_templates(RelationKind kind) {
    static const std::vector<QuestionTemplate> strict = make_strict_order_templates();
    static const std::vector<QuestionTemplate> equal = make_equality_templates();
    static const std::vector<QuestionTemplate> subset = make_proper_subset_templates();
    switch (kind) {
    case RelationKind::StrictOrder:
        return strict;
    case RelationKind::Equality:
        return equal;
    case RelationKind::ProperSubset:
        return subset;
    }
    throw InvalidArgumentError("unknown relation kind");
}

QAExample render_question(const rel::Fact& fact, bool gold, const QuestionTemplate& tmpl,
                          const rel::NameMap& names, const SystemPrompt& prompt) {
    if (tmpl.kind != fact.kind) {
        throw InvalidArgumentError("template kind does not match the fact kind");
    }
    std::string question = substitute_once(tmpl.pattern, "{a}", surface_name(names, fact.lhs));
    question = substitute_once(question, "{b}", surface_name(names, fact.rhs));

    QAExample example;
    example.system_prompt_id = prompt.id;
    example.system_text = prompt.text;
    example.question = question;
    const bool answer_yes = gold != (tmpl.phrasing == Phrasing::Negated);
    example.answer = answer_yes ? Answer::Yes : Answer::No;
    example.fact = fact;
    example.template_id = tmpl.id;
    example.gold = gold;
    return example;
}

std::pair<std::string, Answer> render_plain(const QuestionTemplate& tmpl, const std::string& a,
                                            const std::string& b, bool gold) {
    std::string question = substitute_once(tmpl.pattern, "{a}", a);
    question = substitute_once(question, "{b}", b);
    const bool answer_yes = gold != (tmpl.phrasing == Phrasing::Negated);
    return {question, answer_yes ? Answer::Yes : Answer::No};
}

std::string render_statement(const rel::Fact& fact, const rel::NameMap& names) {
    const std::string& a = surface_name(names, fact.lhs);
    const std::string& b = surface_name(names, fact.rhs);
    const bool holds = fact.polarity == Polarity::Holds;
    switch (fact.kind) {
    case RelationKind::StrictOrder:
        return a + (holds ? " is smaller than " : " is not smaller than ") + b + ".";
    case RelationKind::Equality:
        return a + (holds ? " equals " : " does not equal ") + b + ".";
    case RelationKind::ProperSubset:
        return a + (holds ? " is a proper subset of " : " is not a proper subset of ") + b + ".";
    }
    throw InvalidArgumentError("unknown relation kind");
}

std::string render_axiom_block(const rel::AxiomSet& axioms, const rel::NameMap& names) {
    std::ostringstream out;
    out << "Facts:";
    for (const auto& fact : axioms.facts) {
        out << ' ' << render_statement(fact, names);
    }
    return out.str();
}

TaskDataset build_dataset(const rel::AxiomSet& axioms, const std::vector<rel::TestQuery>& tests,
                          const std::vector<QuestionTemplate>& templates,
                          const std::vector<SystemPrompt>& prompts, const rel::NameMap& names,
                          DatasetMode mode) {
    if (templates.empty()) {
        throw InvalidArgumentError("empty template inventory");
    }
    TaskDataset dataset;
    if (mode == DatasetMode::OutOfContext) {
        for (const auto& fact : axioms.facts) {
            const bool gold = fact.polarity == Polarity::Holds;
            const rel::Fact positive{fact.lhs, fact.rhs, fact.kind, Polarity::Holds};
            for (const auto& tmpl : templates) {
                for (const auto& prompt : prompts) {
                    QAExample example = render_question(positive, gold, tmpl, names, prompt);
                    example.split = Split::Train;
                    dataset.train.push_back(std::move(example));
                }
            }
        }
    }
    const std::string prefix =
        mode == DatasetMode::InContext ? render_axiom_block(axioms, names) + " " : std::string();
    for (const auto& query : tests) {
        for (const auto& tmpl : templates) {
            for (const auto& prompt : prompts) {
                QAExample example = render_question(query.fact, query.gold, tmpl, names, prompt);
                example.split = Split::Test;
                example.distance = query.distance;
                if (!prefix.empty()) {
                    example.question = prefix + example.question;
                }
                dataset.test.push_back(std::move(example));
            }
        }
    }
    dataset.yes_fraction_train = yes_fraction(dataset.train);
    dataset.yes_fraction_test = yes_fraction(dataset.test);
    return dataset;
}

std::string answer_to_string(Answer answer) { return answer == Answer::Yes ? "Yes" : "No"; }

namespace {

nlohmann::ordered_json example_to_json(const QAExample& example) {
    nlohmann::ordered_json record;
    record["system"] = example.system_prompt_id;
    record["question"] = example.question;
    record["answer"] = answer_to_string(example.answer);
    record["fact"] = rel::fact_to_line(example.fact);
    record["template_id"] = example.template_id;
    record["gold"] = example.gold;
    if (example.distance.has_value()) {
        record["distance"] = *example.distance;
    } else {
        record["distance"] = nullptr;
    }
    record["split"] = example.split == Split::Train ? "train" : "test";
    return record;
}

QAExample example_from_json(const nlohmann::json& record) {
    QAExample example;
    example.system_prompt_id = record.at("system").get<int>();
    example.system_text = system_prompts().at(static_cast<size_t>(example.system_prompt_id - 1)).text;
    example.question = record.at("question").get<std::string>();
    example.answer = record.at("answer").get<std::string>() == "Yes" ? Answer::Yes : Answer::No;
    example.fact = rel::fact_from_line(record.at("fact").get<std::string>());
    example.template_id = record.at("template_id").get<int>();
    example.gold = record.at("gold").get<bool>();
    if (!record.at("distance").is_null()) {
        example.distance = record.at("distance").get<int>();
    }
    example.split = record.at("split").get<std::string>() == "train" ? Split::Train : Split::Test;
    return example;
}

} // namespace

std::string dataset_to_jsonl(const TaskDataset& dataset) {
    std::ostringstream out;
    for (const auto& example : dataset.train) {
        out << example_to_json(example).dump() << '\n';
    }
    for (const auto& example : dataset.test) {
        out << example_to_json(example).dump() << '\n';
    }
    return out.str();
}

TaskDataset dataset_from_jsonl(const std::string& text) {
    TaskDataset dataset;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        QAExample example = example_from_json(nlohmann::json::parse(line));
        if (example.split == Split::Train) {
            dataset.train.push_back(std::move(example));
        } else {
            dataset.test.push_back(std::move(example));
        }
    }
    dataset.yes_fraction_train = yes_fraction(dataset.train);
    dataset.yes_fraction_test = yes_fraction(dataset.test);
    return dataset;
}

} // namespace oocrel::text
