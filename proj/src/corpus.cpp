#include "oocrel/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "oocrel/digest.hpp"
#include "oocrel/errors.hpp"
#include "oocrel/model.hpp"
#include "oocrel/relation.hpp"
#include "oocrel/rng.hpp"
#include "oocrel/textgen.hpp"

namespace oocrel::lm {

namespace {

using text::Answer;
using text::QuestionTemplate;

std::string set_name(int i) { return "s" + std::to_string(i); }

std::vector<std::string> vocabulary_seed_texts(const CorpusConfig& config) {
    std::vector<std::string> texts;
    for (const auto& prompt : text::system_prompts()) {
        texts.push_back(prompt.text);
    }
    for (auto kind : {rel::RelationKind::StrictOrder, rel::RelationKind::Equality,
                      rel::RelationKind::ProperSubset}) {
        for (const auto& tmpl : text::question_templates(kind)) {
            auto [question, answer] = text::render_plain(tmpl, "0", "1", true);
            (void)answer;
            texts.push_back(question);
        }
        // canonical declarative surfaces, both polarities
        rel::AxiomSet probe = rel::build_axioms(kind, rel::Setting::Minimal,
                                                kind == rel::RelationKind::Equality
                                                    ? rel::PropertyKind::Symmetry
                                                    : rel::PropertyKind::Transitivity,
                                                3);
        rel::NameMap names;
        for (const auto& element : probe.universe) {
            names[element] = "0";
        }
        for (auto polarity : {rel::Polarity::Holds, rel::Polarity::HoldsNot}) {
            texts.push_back(text::render_statement(
                rel::Fact{probe.universe.front(), probe.universe.back(), kind, polarity}, names));
        }
    }
    texts.push_back("Facts:");
    std::string numerals;
    for (int i = 0; i < config.numerals; ++i) {
        numerals += std::to_string(i) + " ";
    }
    texts.push_back(numerals);
    std::string sets;
    for (int i = 0; i < config.set_constants; ++i) {
        sets += set_name(i) + " ";
    }
    texts.push_back(sets);
    texts.push_back("a b c d e f g h i j k l m n o p q r s t u v w x y z");
    return texts;
}

const QuestionTemplate& pick_template(Rng& rng, rel::RelationKind kind) {
    const auto& inventory = text::question_templates(kind);
    return inventory[static_cast<size_t>(rng.below(inventory.size()))];
}

const text::SystemPrompt& pick_prompt(Rng& rng) {
    const auto& prompts = text::system_prompts();
    return prompts[static_cast<size_t>(rng.below(prompts.size()))];
}

std::string flatten_with_answer(const text::SystemPrompt& prompt, const std::string& question,
                                Answer answer) {
    return flatten_prompt(prompt.text, question) + " " + text::answer_to_string(answer);
}

} // namespace

std::string CorpusConfig::digest_text() const {
    std::ostringstream out;
    out << "seed=" << seed << " numerals=" << numerals << " set_constants=" << set_constants
        << " order=" << order_examples << " equality=" << equality_examples
        << " subset=" << subset_examples << " incontext=" << incontext_examples
        << " holdout_fraction=" << holdout_fraction << " holdout_eval=" << holdout_eval_size;
    return out.str();
}

std::string Corpus::digest() const {
    Sha256 hasher;
    for (const auto& line : train) {
        hasher.update(line);
        hasher.update("\n", 1);
    }
    hasher.update("--holdout--");
    for (size_t i = 0; i < holdout_prompts.size(); ++i) {
        hasher.update(holdout_answers[i]);
        hasher.update("\t", 1);
        hasher.update(holdout_prompts[i]);
        hasher.update("\n", 1);
    }
    return hasher.hex_digest();
}

Corpus generate_pretraining_corpus(const CorpusConfig& config) {
    if (config.numerals < 2 || config.set_constants < 2) {
        throw InvalidArgumentError("corpus needs at least two numerals and set constants");
    }
    Corpus corpus;
    corpus.vocab = vocab_from_texts(vocabulary_seed_texts(config));

    // Reserve numeral pairs for the held-out gate.
    std::vector<std::pair<int, int>> all_pairs;
    for (int i = 0; i < config.numerals; ++i) {
        for (int j = 0; j < config.numerals; ++j) {
            if (i != j) {
                all_pairs.push_back({i, j});
            }
        }
    }
    Rng holdout_rng = derive_rng(config.seed, 1);
    holdout_rng.shuffle(all_pairs);
    const size_t holdout_count = static_cast<size_t>(
        config.holdout_fraction * static_cast<double>(all_pairs.size()));
    std::set<std::pair<int, int>> holdout_pairs(all_pairs.begin(),
                                                all_pairs.begin() +
                                                    static_cast<long>(holdout_count));
    std::vector<std::pair<int, int>> train_pairs(all_pairs.begin() + static_cast<long>(holdout_count),
                                                 all_pairs.end());

    // Plain comparison questions over numerals.
    Rng order_rng = derive_rng(config.seed, 2);
    for (int k = 0; k < config.order_examples; ++k) {
        const auto& pair = train_pairs[static_cast<size_t>(order_rng.below(train_pairs.size()))];
        const bool gold = pair.first < pair.second;
        const auto& tmpl = pick_template(order_rng, rel::RelationKind::StrictOrder);
        const auto& prompt = pick_prompt(order_rng);
        auto [question, answer] = text::render_plain(tmpl, std::to_string(pair.first),
                                                     std::to_string(pair.second), gold);
        corpus.train.push_back(flatten_with_answer(prompt, question, answer));
    }

    // Equality questions: half reflexive positives, half mismatched negatives.
    Rng eq_rng = derive_rng(config.seed, 3);
    for (int k = 0; k < config.equality_examples; ++k) {
        const bool positive = k % 2 == 0;
        int a = static_cast<int>(eq_rng.below(static_cast<uint64_t>(config.numerals)));
        int b = a;
        if (!positive) {
            while (b == a) {
                b = static_cast<int>(eq_rng.below(static_cast<uint64_t>(config.numerals)));
            }
        }
        const auto& tmpl = pick_template(eq_rng, rel::RelationKind::Equality);
        const auto& prompt = pick_prompt(eq_rng);
        auto [question, answer] =
            text::render_plain(tmpl, std::to_string(a), std::to_string(b), positive);
        corpus.train.push_back(flatten_with_answer(prompt, question, answer));
    }

    // Subset questions over the nested set constants s0 c s1 c ... .
    Rng subset_rng = derive_rng(config.seed, 4);
    for (int k = 0; k < config.subset_examples; ++k) {
        int a = static_cast<int>(subset_rng.below(static_cast<uint64_t>(config.set_constants)));
        int b = a;
        while (b == a) {
            b = static_cast<int>(subset_rng.below(static_cast<uint64_t>(config.set_constants)));
        }
        const bool gold = a < b;
        const auto& tmpl = pick_template(subset_rng, rel::RelationKind::ProperSubset);
        const auto& prompt = pick_prompt(subset_rng);
        auto [question, answer] = text::render_plain(tmpl, set_name(a), set_name(b), gold);
        corpus.train.push_back(flatten_with_answer(prompt, question, answer));
    }

    // Facts-block tasks over letters: small minimal constructions whose
    // element surfaces are shuffled letters, one entailed query each.
    Rng ctx_rng = derive_rng(config.seed, 5);
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
    for (int k = 0; k < config.incontext_examples; ++k) {
        const rel::RelationKind kind = static_cast<rel::RelationKind>(ctx_rng.below(3));
        const int n = 3 + static_cast<int>(ctx_rng.below(3)); // 3..5
        std::vector<rel::PropertyKind> valid;
        for (auto property :
             {rel::PropertyKind::Reflexivity, rel::PropertyKind::Irreflexivity,
              rel::PropertyKind::Symmetry, rel::PropertyKind::Asymmetry,
              rel::PropertyKind::Transitivity}) {
            if (rel::property_valid_for(kind, property)) {
                valid.push_back(property);
            }
        }
        const rel::PropertyKind property = valid[static_cast<size_t>(ctx_rng.below(valid.size()))];
        const rel::AxiomSet axioms = rel::build_axioms(kind, rel::Setting::Minimal, property, n);
        const auto tests = rel::build_tests(kind, property, rel::Setting::Minimal, n);
        if (tests.empty()) {
            continue;
        }
        // shuffled letter assignment so alphabet order carries no signal
        std::vector<char> letters(alphabet.begin(), alphabet.end());
        ctx_rng.shuffle(letters);
        rel::NameMap names;
        size_t next_letter = 0;
        for (const auto& element : axioms.universe) {
            names[element] = std::string(1, letters[next_letter++]);
        }
        const auto& query = tests[static_cast<size_t>(ctx_rng.below(tests.size()))];
        const auto& tmpl = pick_template(ctx_rng, kind);
        const auto& prompt = pick_prompt(ctx_rng);
        auto [question, answer] = text::render_plain(tmpl, names.at(query.fact.lhs),
                                                     names.at(query.fact.rhs), query.gold);
        const std::string block = text::render_axiom_block(axioms, names) + " " + question;
        const std::string line = flatten_with_answer(prompt, block, answer);
        if (static_cast<int>(segment_words(line).size()) > config.max_tokens) {
            continue; // would not fit the reference context window
        }
        corpus.train.push_back(line);
    }

    // Held-out comparison prompts for the pretraining gate.
    Rng gate_rng = derive_rng(config.seed, 6);
    std::vector<std::pair<int, int>> gate_pairs(holdout_pairs.begin(), holdout_pairs.end());
    for (int k = 0; k < config.holdout_eval_size && !gate_pairs.empty(); ++k) {
        const auto& pair = gate_pairs[static_cast<size_t>(gate_rng.below(gate_pairs.size()))];
        const bool gold = pair.first < pair.second;
        const auto& tmpl = pick_template(gate_rng, rel::RelationKind::StrictOrder);
        const auto& prompt = pick_prompt(gate_rng);
        auto [question, answer] = text::render_plain(tmpl, std::to_string(pair.first),
                                                     std::to_string(pair.second), gold);
        corpus.holdout_prompts.push_back(flatten_prompt(prompt.text, question));
        corpus.holdout_answers.push_back(text::answer_to_string(answer));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& train_path,
                 const std::string& holdout_path) {
    std::ofstream train(train_path, std::ios::trunc);
    if (!train) {
        throw IoError("cannot write corpus: " + train_path);
    }
    // header pins the entity inventory the vocabulary derives from
    int numerals = 0;
    while (corpus.vocab.contains(std::to_string(numerals))) {
        ++numerals;
    }
    int sets = 0;
    while (corpus.vocab.contains(set_name(sets))) {
        ++sets;
    }
    train << "#vocab numerals=" << numerals << " set_constants=" << sets << '\n';
    for (const auto& line : corpus.train) {
        train << line << '\n';
    }
    std::ofstream holdout(holdout_path, std::ios::trunc);
    if (!holdout) {
        throw IoError("cannot write corpus holdout: " + holdout_path);
    }
    for (size_t i = 0; i < corpus.holdout_prompts.size(); ++i) {
        holdout << corpus.holdout_answers[i] << '\t' << corpus.holdout_prompts[i] << '\n';
    }
}

Corpus load_corpus(const std::string& train_path, const std::string& holdout_path) {
    Corpus corpus;
    std::ifstream train(train_path);
    if (!train) {
        throw IoError("cannot read corpus: " + train_path);
    }
    std::vector<std::string> all_texts;
    std::string line;
    CorpusConfig vocab_basis;
    bool saw_header = false;
    while (std::getline(train, line)) {
        if (line.empty()) {
            continue;
        }
        if (line.rfind("#vocab ", 0) == 0) {
            if (std::sscanf(line.c_str(), "#vocab numerals=%d set_constants=%d",
                            &vocab_basis.numerals, &vocab_basis.set_constants) != 2) {
                throw IoError("malformed corpus vocabulary header: " + line);
            }
            saw_header = true;
            continue;
        }
        corpus.train.push_back(line);
        all_texts.push_back(line);
    }
    if (!saw_header) {
        throw IoError("corpus file lacks the vocabulary header: " + train_path);
    }
    std::ifstream holdout(holdout_path);
    if (!holdout) {
        throw IoError("cannot read corpus holdout: " + holdout_path);
    }
    while (std::getline(holdout, line)) {
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw IoError("malformed corpus holdout line: " + line);
        }
        corpus.holdout_answers.push_back(line.substr(0, tab));
        corpus.holdout_prompts.push_back(line.substr(tab + 1));
        all_texts.push_back(line.substr(tab + 1));
    }
    // Vocabulary must not depend on which examples were sampled.
    corpus.vocab = vocab_from_texts(vocabulary_seed_texts(vocab_basis));
    for (const auto& textline : all_texts) {
        for (const auto& word : segment_words(textline)) {
            if (!corpus.vocab.contains(word)) {
                throw IoError("corpus word missing from the canonical vocabulary: " + word);
            }
        }
    }
    return corpus;
}

} // namespace oocrel::lm
