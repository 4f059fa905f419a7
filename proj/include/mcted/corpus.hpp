#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcted/tensor.hpp"

namespace mcted {

struct ParsedArc {
    int head = 0;
    int dependent = 0;
    std::string relation;

    bool operator==(const ParsedArc&) const = default;
};

// One pre-parsed, token-annotated sentence. The reserved label "NONE" marks
// tokens that are not triggers.
struct ParsedSentence {
    std::vector<std::string> tokens;
    std::vector<std::string> pos_tags;
    std::vector<std::string> labels;
    std::vector<ParsedArc> arcs;

    int size() const { return static_cast<int>(tokens.size()); }
    void validate() const;  // throws validation_error

    bool operator==(const ParsedSentence&) const = default;
};

inline constexpr const char* kNoneLabel = "NONE";

// Sentence file format: blank-line separated blocks, one token per line with
// TAB-separated columns INDEX TOKEN POS HEAD RELATION LABEL. HEAD and
// RELATION are "-" for tokens without an incoming arc. Lines starting with
// "#" are comments.
std::vector<ParsedSentence> parse_sentence_file(const std::string& text);
std::string serialize_sentences(const std::vector<ParsedSentence>& sentences);
std::vector<ParsedSentence> load_sentence_file(const std::string& path);

class Vocabulary {
public:
    static constexpr int kPadding = 0;
    static constexpr int kUnknown = 1;

    // Tokens below min_count map to UNKNOWN. Ordering is frequency
    // descending with lexicographic tie-break, so builds are deterministic.
    static Vocabulary build(const std::vector<ParsedSentence>& corpus, int min_count);
    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

    int index_of(const std::string& token) const;
    const std::string& token_at(int index) const { return index_to_token_[static_cast<size_t>(index)]; }
    bool contains(const std::string& token) const { return token_to_index_.count(token) > 0; }
    int size() const { return static_cast<int>(index_to_token_.size()); }
    const std::vector<std::string>& tokens() const { return index_to_token_; }

private:
    std::vector<std::string> index_to_token_;
    std::unordered_map<std::string, int> token_to_index_;
};

// Word-type (POS) and relation-type inventories. Each base relation gets an
// inverse twin and one shared self-loop type, so graph construction can make
// message passing bidirectional over directed arcs.
class TypeInventories {
public:
    static TypeInventories build(const std::vector<ParsedSentence>& corpus);
    static TypeInventories from_lists(std::vector<std::string> word_types,
                                      std::vector<std::string> base_relations);

    int word_type_count() const { return static_cast<int>(word_types_.size()); }
    int base_relation_count() const { return static_cast<int>(base_relations_.size()); }
    int relation_type_count() const { return 2 * base_relation_count() + 1; }

    int word_type_index(const std::string& pos) const;       // throws unknown_type_error
    int base_relation_index(const std::string& rel) const;   // throws unknown_type_error
    int inverse_relation_index(int base_index) const { return base_relation_count() + base_index; }
    int self_loop_index() const { return 2 * base_relation_count(); }

    std::string relation_name(int index) const;
    const std::vector<std::string>& word_types() const { return word_types_; }
    const std::vector<std::string>& base_relations() const { return base_relations_; }

private:
    std::vector<std::string> word_types_;
    std::vector<std::string> base_relations_;
    std::unordered_map<std::string, int> word_type_index_;
    std::unordered_map<std::string, int> base_relation_index_;
    void rebuild_maps();
};

struct CorpusSplit {
    std::vector<ParsedSentence> train;
    std::vector<ParsedSentence> valid;
    std::vector<ParsedSentence> test;
    uint64_t seed = 0;
};

// Seeded shuffle followed by a largest-remainder contiguous cut, so the part
// sizes stay within one sentence of the requested ratios.
CorpusSplit split_corpus(const std::vector<ParsedSentence>& corpus,
                         const std::array<double, 3>& ratios, uint64_t seed);

// Text format: one token per line, "token v1 v2 ... v_dim". Rows for tokens
// missing from the file are drawn from a seeded Gaussian.
Tensor load_pretrained_embeddings(const std::string& text, const Vocabulary& vocab, int dim,
                                  uint64_t seed);

}  // namespace mcted
