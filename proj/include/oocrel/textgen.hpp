#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oocrel/relation.hpp"

namespace oocrel::text {

struct SystemPrompt {
    int id = 1; // 1..7
    std::string text;
};

enum class Phrasing : uint8_t { Affirmative, Negated };

struct QuestionTemplate {
    int id = 0;
    rel::RelationKind kind = rel::RelationKind::StrictOrder;
    std::string pattern; // contains {a} and {b} slots
    Phrasing phrasing = Phrasing::Affirmative;
    std::string comparison_surface; // strict order only; empty otherwise
};

const std::vector<SystemPrompt>& system_prompts();
const std::vector<QuestionTemplate>& question_templates(rel::RelationKind kind);

enum class Answer : uint8_t { Yes, No };
enum class Split : uint8_t { Train, Test };

struct QAExample {
    int system_prompt_id = 1;
    std::string system_text;
    std::string question;
    Answer answer = Answer::Yes;
    // provenance
    rel::Fact fact;
    int template_id = 0;
    bool gold = true;
    std::optional<int> distance;
    Split split = Split::Train;
};

struct TaskDataset {
    std::vector<QAExample> train;
    std::vector<QAExample> test;
    double yes_fraction_train = 0.0;
    double yes_fraction_test = 0.0;
};

enum class DatasetMode : uint8_t { OutOfContext, InContext };

QAExample render_question(const rel::Fact& fact, bool gold, const QuestionTemplate& tmpl,
                          const rel::NameMap& names, const SystemPrompt& prompt);

// Slot substitution plus the answer rule for surfaces that are not tied to a
// relation universe (pretraining corpus entities).
std::pair<std::string, Answer> render_plain(const QuestionTemplate& tmpl, const std::string& a,
                                            const std::string& b, bool gold);

// Canonical declarative surface, one fixed form per kind, used for in-context
// axiom blocks and the pretraining corpus.
std::string render_statement(const rel::Fact& fact, const rel::NameMap& names);

// Declarative block listing all axioms, chain-first order, "Facts:" header.
std::string render_axiom_block(const rel::AxiomSet& axioms, const rel::NameMap& names);

TaskDataset build_dataset(const rel::AxiomSet& axioms, const std::vector<rel::TestQuery>& tests,
                          const std::vector<QuestionTemplate>& templates,
                          const std::vector<SystemPrompt>& prompts, const rel::NameMap& names,
                          DatasetMode mode);

std::string answer_to_string(Answer answer);

// JSON-lines serialization, byte-stable for identical inputs.
std::string dataset_to_jsonl(const TaskDataset& dataset);
TaskDataset dataset_from_jsonl(const std::string& text);

} // namespace oocrel::text
