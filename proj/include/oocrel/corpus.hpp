#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oocrel/vocab.hpp"

namespace oocrel::lm {

// Synthetic pretraining data over known entities: numerals for < and =, a
// nested family of set constants for the subset relation, and facts-block
// tasks over Latin letters that teach the in-context format. Element tokens
// used by later embedding experiments (v0, v1, ...) never appear.
struct CorpusConfig {
    uint64_t seed = 1;
    int numerals = 100;
    int set_constants = 20;
    int order_examples = 12000;
    int equality_examples = 3000;
    int subset_examples = 3000;
    int incontext_examples = 4000;
    double holdout_fraction = 0.05; // numeral pairs reserved for the gate
    int holdout_eval_size = 800;
    int max_tokens = 128; // rendered sequences must fit the model context

    std::string digest_text() const;
};

struct Corpus {
    Vocabulary vocab;
    std::vector<std::string> train;           // flattened sequences, answer included
    std::vector<std::string> holdout_prompts; // flattened, end with the answer marker
    std::vector<std::string> holdout_answers; // "Yes" / "No", aligned

    std::string digest() const;
};

Corpus generate_pretraining_corpus(const CorpusConfig& config);

// Line-delimited persistence: train file has one sequence per line; the
// holdout file pairs "answer<TAB>prompt".
void save_corpus(const Corpus& corpus, const std::string& train_path,
                 const std::string& holdout_path);
Corpus load_corpus(const std::string& train_path, const std::string& holdout_path);

} // namespace oocrel::lm
