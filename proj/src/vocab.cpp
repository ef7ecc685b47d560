#include "oocrel/vocab.hpp"

#include <algorithm>
#include <cctype>

#include "oocrel/errors.hpp"

namespace oocrel::lm {

namespace {

bool is_splittable_punct(char c) {
    switch (c) {
    case '?':
    case '.':
    case ',':
    case '!':
    case ':':
    case ';':
        return true;
    default:
        return false;
    }
}

bool is_marker(const std::string& chunk) {
    return chunk == Vocabulary::kSysMarker || chunk == Vocabulary::kUserMarker ||
           chunk == Vocabulary::kAnswerMarker;
}

} // namespace

std::vector<std::string> segment_words(const std::string& text) {
    std::vector<std::string> words;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (i >= text.size()) {
            break;
        }
        size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) {
            ++j;
        }
        std::string chunk = text.substr(i, j - i);
        i = j;
        if (is_marker(chunk)) {
            words.push_back(std::move(chunk));
            continue;
        }
        // peel leading punctuation
        size_t begin = 0;
        while (begin < chunk.size() && is_splittable_punct(chunk[begin])) {
            words.push_back(std::string(1, chunk[begin]));
            ++begin;
        }
        size_t end = chunk.size();
        std::vector<std::string> trailing;
        while (end > begin && is_splittable_punct(chunk[end - 1])) {
            trailing.push_back(std::string(1, chunk[end - 1]));
            --end;
        }
        if (end > begin) {
            words.push_back(chunk.substr(begin, end - begin));
        }
        words.insert(words.end(), trailing.rbegin(), trailing.rend());
    }
    return words;
}

Vocabulary Vocabulary::base(const std::vector<std::string>& words) {
    Vocabulary vocab;
    vocab.add(kSysMarker);
    vocab.add(kUserMarker);
    vocab.add(kAnswerMarker);
    vocab.yes_id_ = vocab.add("Yes");
    vocab.no_id_ = vocab.add("No");
    for (const auto& word : words) {
        if (!vocab.contains(word)) {
            vocab.add(word);
        }
    }
    vocab.mark_base();
    return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens, int base_size) {
    Vocabulary vocab;
    for (const auto& token : tokens) {
        vocab.add(token);
    }
    if (base_size < 0 || base_size > vocab.size()) {
        throw InvalidArgumentError("vocabulary base size out of range");
    }
    vocab.base_size_ = base_size;
    vocab.yes_id_ = vocab.id_of("Yes");
    vocab.no_id_ = vocab.id_of("No");
    vocab.id_of(kSysMarker);
    vocab.id_of(kUserMarker);
    vocab.id_of(kAnswerMarker);
    return vocab;
}

int Vocabulary::add(const std::string& token) {
    if (token.empty()) {
        throw InvalidArgumentError("cannot add an empty token");
    }
    if (contains(token)) {
        throw InvalidArgumentError("duplicate token: " + token);
    }
    const int id = size();
    tokens_.push_back(token);
    id_of_[token] = id;
    return id;
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = id_of_.find(token);
    if (it == id_of_.end()) {
        throw TokenizeError("unknown word: " + token);
    }
    return it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return id_of_.find(token) != id_of_.end();
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || id >= size()) {
        throw InvalidArgumentError("token id out of range: " + std::to_string(id));
    }
    return tokens_[static_cast<size_t>(id)];
}

void Vocabulary::mark_base() { base_size_ = size(); }

std::vector<int> Vocabulary::tokenize(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& word : segment_words(text)) {
        ids.push_back(id_of(word));
    }
    return ids;
}

std::string Vocabulary::detokenize(const std::vector<int>& ids) const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) {
            out.push_back(' ');
        }
        out += token_of(ids[i]);
    }
    return out;
}

Vocabulary vocab_from_texts(const std::vector<std::string>& texts) {
    std::vector<std::string> words;
    std::unordered_map<std::string, bool> seen;
    for (const auto& text : texts) {
        for (auto& word : segment_words(text)) {
            if (!seen[word]) {
                seen[word] = true;
                words.push_back(word);
            }
        }
    }
    return Vocabulary::base(words);
}

} // namespace oocrel::lm
