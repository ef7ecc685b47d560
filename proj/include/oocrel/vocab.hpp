#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace oocrel::lm {

// Word-level vocabulary with a stable id order and an extension region for
// tokens added after the base model is frozen. Ids are never renumbered.
class Vocabulary {
public:
    static constexpr const char* kSysMarker = "<|sys|>";
    static constexpr const char* kUserMarker = "<|user|>";
    static constexpr const char* kAnswerMarker = "<|ans|>";

    Vocabulary() = default;

    // Builds a vocabulary from the given word list; structural markers and the
    // answer words are always present and come first.
    static Vocabulary base(const std::vector<std::string>& words);

    // Rebuilds a vocabulary from an already-ordered token list (deserialization).
    static Vocabulary from_tokens(const std::vector<std::string>& tokens, int base_size);

    int add(const std::string& token);      // appends; error if duplicate
    int id_of(const std::string& token) const;
    bool contains(const std::string& token) const;
    const std::string& token_of(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }

    int yes_id() const { return yes_id_; }
    int no_id() const { return no_id_; }
    int sys_id() const { return id_of(kSysMarker); }
    int user_id() const { return id_of(kUserMarker); }
    int answer_id() const { return id_of(kAnswerMarker); }

    // Boundary of the frozen base region; ids >= base_size() are extensions.
    int base_size() const { return base_size_; }
    void mark_base();
    bool is_extension(int id) const { return id >= base_size_; }

    const std::vector<std::string>& tokens() const { return tokens_; }

    // Whitespace segmentation with leading/trailing punctuation split off;
    // marker tokens match whole chunks before punctuation handling.
    std::vector<int> tokenize(const std::string& text) const;
    std::string detokenize(const std::vector<int>& ids) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> id_of_;
    int base_size_ = 0;
    int yes_id_ = -1;
    int no_id_ = -1;
};

// Splits text into word/punctuation chunks without consulting a vocabulary.
std::vector<std::string> segment_words(const std::string& text);

// Base vocabulary covering every word of the given texts, first-seen order.
Vocabulary vocab_from_texts(const std::vector<std::string>& texts);

} // namespace oocrel::lm
