#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oocrel/corpus.hpp"
#include "oocrel/model.hpp"

namespace oocrel::lm {

struct PretrainConfig {
    int epochs = 3;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 1.0;
    double answer_weight = 4.0;  // NextToken loss weight of the answer transition
    double prompt_weight = 0.05; // weight of every other next-token transition
    uint64_t shuffle_seed = 7;
    int threads = 0; // 0 = hardware concurrency
    double gate_accuracy = 0.99;
    bool eval_each_epoch = false;
};

struct PretrainResult {
    std::vector<std::string> log_lines;
    std::vector<double> epoch_losses;
    double holdout_accuracy = 0.0;
    bool gate_passed = false;
};

// Full-parameter next-token training over the corpus; freezes the model and
// records its digest once finished. Throws DivergenceError on non-finite loss.
PretrainResult pretrain(LanguageModel& model, const Corpus& corpus, const PretrainConfig& config);

// Mean normalized Yes/No accuracy over held-out comparison prompts.
double holdout_normalized_accuracy(const LanguageModel& model, const Corpus& corpus, int threads);

} // namespace oocrel::lm
