#include "mcted/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mcted/rng.hpp"
#include "mcted/util.hpp"

namespace mcted {

void ParsedSentence::validate() const {
    const size_t n = tokens.size();
    if (n == 0) throw validation_error("sentence has no tokens");
    if (pos_tags.size() != n || labels.size() != n) {
        throw validation_error("token/pos/label column lengths differ");
    }
    for (const ParsedArc& arc : arcs) {
        if (arc.head < 0 || arc.head >= static_cast<int>(n) || arc.dependent < 0 ||
            arc.dependent >= static_cast<int>(n)) {
            throw validation_error("arc index out of range: (" + std::to_string(arc.head) + "," +
                                   std::to_string(arc.dependent) + ") in sentence of length " +
                                   std::to_string(n));
        }
        if (arc.head == arc.dependent) {
            throw validation_error("self-loop arc at token " + std::to_string(arc.head));
        }
    }
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

int parse_int_field(const std::string& s, int line_no, const char* what) {
    if (s.empty()) throw parse_error("line " + std::to_string(line_no) + ": empty " + what);
    size_t pos = 0;
    int value = 0;
    try {
        value = std::stoi(s, &pos);
    } catch (const std::exception&) {
        throw parse_error("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    }
    if (pos != s.size()) {
        throw parse_error("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    }
    return value;
}

}  // namespace

std::vector<ParsedSentence> parse_sentence_file(const std::string& text) {
    std::vector<ParsedSentence> sentences;
    ParsedSentence current;
    std::vector<std::pair<int, int>> pending_heads;  // (head, line_no) per token

    const auto finish_block = [&](int line_no) {
        if (current.tokens.empty()) return;
        for (const auto& [head, head_line] : pending_heads) {
            if (head >= current.size()) {
                throw validation_error("line " + std::to_string(head_line) + ": head index " +
                                       std::to_string(head) + " outside sentence of length " +
                                       std::to_string(current.size()));
            }
        }
        try {
            current.validate();
        } catch (const validation_error& e) {
            throw validation_error("sentence ending before line " + std::to_string(line_no) + ": " +
                                   e.what());
        }
        sentences.push_back(std::move(current));
        current = ParsedSentence{};
        pending_heads.clear();
    };

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            finish_block(line_no);
            continue;
        }
        if (line[0] == '#') continue;

        const std::vector<std::string> fields = split_tabs(line);
        if (fields.size() != 6) {
            throw parse_error("line " + std::to_string(line_no) + ": expected 6 TAB-separated " +
                              "columns, got " + std::to_string(fields.size()));
        }
        const int index = parse_int_field(fields[0], line_no, "token index");
        if (index != current.size()) {
            throw parse_error("line " + std::to_string(line_no) + ": token index " +
                              std::to_string(index) + " out of order (expected " +
                              std::to_string(current.size()) + ")");
        }
        if (fields[1].empty() || fields[2].empty() || fields[5].empty()) {
            throw parse_error("line " + std::to_string(line_no) + ": empty token, POS or label");
        }
        current.tokens.push_back(fields[1]);
        current.pos_tags.push_back(fields[2]);
        current.labels.push_back(fields[5]);

        const std::string& head_field = fields[3];
        const std::string& rel_field = fields[4];
        if (head_field == "-") {
            if (rel_field != "-") {
                throw parse_error("line " + std::to_string(line_no) +
                                  ": RELATION must be '-' when HEAD is '-'");
            }
            pending_heads.emplace_back(-1, line_no);
        } else {
            const int head = parse_int_field(head_field, line_no, "head index");
            if (rel_field == "-" || rel_field.empty()) {
                throw parse_error("line " + std::to_string(line_no) +
                                  ": missing relation for head " + head_field);
            }
            current.arcs.push_back(ParsedArc{head, index, rel_field});
            pending_heads.emplace_back(head, line_no);
        }
    }
    finish_block(line_no + 1);
    return sentences;
}

std::string serialize_sentences(const std::vector<ParsedSentence>& sentences) {
    std::ostringstream out;
    for (size_t s = 0; s < sentences.size(); ++s) {
        const ParsedSentence& sent = sentences[s];
        // head/relation per dependent token; the file format stores at most
        // one incoming arc per token.
        std::vector<int> head(sent.tokens.size(), -1);
        std::vector<std::string> relation(sent.tokens.size());
        for (const ParsedArc& arc : sent.arcs) {
            head[static_cast<size_t>(arc.dependent)] = arc.head;
            relation[static_cast<size_t>(arc.dependent)] = arc.relation;
        }
        if (s > 0) out << "\n";
        for (int i = 0; i < sent.size(); ++i) {
            out << i << "\t" << sent.tokens[static_cast<size_t>(i)] << "\t"
                << sent.pos_tags[static_cast<size_t>(i)] << "\t";
            if (head[static_cast<size_t>(i)] < 0) {
                out << "-\t-";
            } else {
                out << head[static_cast<size_t>(i)] << "\t" << relation[static_cast<size_t>(i)];
            }
            out << "\t" << sent.labels[static_cast<size_t>(i)] << "\n";
        }
    }
    return out.str();
}

std::vector<ParsedSentence> load_sentence_file(const std::string& path) {
    return parse_sentence_file(read_text_file(path));
}

Vocabulary Vocabulary::build(const std::vector<ParsedSentence>& corpus, int min_count) {
    if (min_count < 1) throw contract_error("build_vocab: min_count must be >= 1");
    if (corpus.empty()) throw validation_error("build_vocab: empty corpus");

    std::map<std::string, long long> counts;
    for (const ParsedSentence& s : corpus) {
        for (const std::string& t : s.tokens) ++counts[t];
    }
    std::vector<std::pair<std::string, long long>> entries(counts.begin(), counts.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    v.index_to_token_ = {"<pad>", "<unk>"};
    for (const auto& [token, count] : entries) {
        if (count >= min_count) v.index_to_token_.push_back(token);
    }
    for (size_t i = 0; i < v.index_to_token_.size(); ++i) {
        v.token_to_index_[v.index_to_token_[i]] = static_cast<int>(i);
    }
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    v.index_to_token_ = tokens;
    for (size_t i = 0; i < tokens.size(); ++i) {
        v.token_to_index_[tokens[i]] = static_cast<int>(i);
    }
    return v;
}

int Vocabulary::index_of(const std::string& token) const {
    const auto it = token_to_index_.find(token);
    return it == token_to_index_.end() ? kUnknown : it->second;
}

TypeInventories TypeInventories::build(const std::vector<ParsedSentence>& corpus) {
    if (corpus.empty()) throw validation_error("build_type_inventories: empty corpus");
    std::map<std::string, int> pos_set;
    std::map<std::string, int> rel_set;
    for (const ParsedSentence& s : corpus) {
        for (const std::string& p : s.pos_tags) pos_set[p] = 1;
        for (const ParsedArc& a : s.arcs) rel_set[a.relation] = 1;
    }
    TypeInventories inv;
    for (const auto& [pos, _] : pos_set) inv.word_types_.push_back(pos);
    for (const auto& [rel, _] : rel_set) inv.base_relations_.push_back(rel);
    inv.rebuild_maps();
    return inv;
}

TypeInventories TypeInventories::from_lists(std::vector<std::string> word_types,
                                            std::vector<std::string> base_relations) {
    TypeInventories inv;
    inv.word_types_ = std::move(word_types);
    inv.base_relations_ = std::move(base_relations);
    inv.rebuild_maps();
    return inv;
}

void TypeInventories::rebuild_maps() {
    word_type_index_.clear();
    base_relation_index_.clear();
    for (size_t i = 0; i < word_types_.size(); ++i) {
        word_type_index_[word_types_[i]] = static_cast<int>(i);
    }
    for (size_t i = 0; i < base_relations_.size(); ++i) {
        base_relation_index_[base_relations_[i]] = static_cast<int>(i);
    }
}

int TypeInventories::word_type_index(const std::string& pos) const {
    const auto it = word_type_index_.find(pos);
    if (it == word_type_index_.end()) {
        throw unknown_type_error("unknown word type: " + pos);
    }
    return it->second;
}

int TypeInventories::base_relation_index(const std::string& rel) const {
    const auto it = base_relation_index_.find(rel);
    if (it == base_relation_index_.end()) {
        throw unknown_type_error("unknown relation type: " + rel);
    }
    return it->second;
}

std::string TypeInventories::relation_name(int index) const {
    const int base = base_relation_count();
    if (index < base) return base_relations_[static_cast<size_t>(index)];
    if (index < 2 * base) return base_relations_[static_cast<size_t>(index - base)] + ":rev";
    return ":self";
}

CorpusSplit split_corpus(const std::vector<ParsedSentence>& corpus,
                         const std::array<double, 3>& ratios, uint64_t seed) {
    double sum = 0.0;
    for (const double r : ratios) {
        if (r < 0.0) throw contract_error("split_corpus: negative ratio");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw contract_error("split_corpus: ratios sum to " + format_double(sum));
    }
    const int n = static_cast<int>(corpus.size());
    if (n < 3) throw validation_error("split_corpus: need at least 3 sentences");

    // Largest-remainder apportionment keeps every part within one sentence
    // of its quota.
    std::array<int, 3> sizes{};
    std::array<double, 3> fractional{};
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double quota = ratios[static_cast<size_t>(i)] * n;
        sizes[static_cast<size_t>(i)] = static_cast<int>(std::floor(quota));
        fractional[static_cast<size_t>(i)] = quota - std::floor(quota);
        assigned += sizes[static_cast<size_t>(i)];
    }
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (fractional[static_cast<size_t>(a)] != fractional[static_cast<size_t>(b)]) {
            return fractional[static_cast<size_t>(a)] > fractional[static_cast<size_t>(b)];
        }
        return a < b;
    });
    for (int i = 0; assigned < n; ++i, ++assigned) {
        ++sizes[static_cast<size_t>(order[static_cast<size_t>(i % 3)])];
    }

    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(perm);

    CorpusSplit split;
    split.seed = seed;
    int cursor = 0;
    const auto take = [&](int count) {
        std::vector<ParsedSentence> part;
        part.reserve(static_cast<size_t>(count));
        for (int i = 0; i < count; ++i) {
            part.push_back(corpus[static_cast<size_t>(perm[static_cast<size_t>(cursor++)])]);
        }
        return part;
    };
    split.train = take(sizes[0]);
    split.valid = take(sizes[1]);
    split.test = take(sizes[2]);
    return split;
}

Tensor load_pretrained_embeddings(const std::string& text, const Vocabulary& vocab, int dim,
                                  uint64_t seed) {
    if (dim < 1) throw contract_error("load_pretrained_embeddings: dim must be >= 1");
    Rng rng(derive_seed(seed, "pretrained-fill"));
    Tensor table(vocab.size(), dim);
    for (size_t i = 0; i < table.size(); ++i) table[i] = rng.gaussian(0.0, 0.1);

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> values;
        std::string field;
        while (ls >> field) {
            try {
                size_t pos = 0;
                values.push_back(std::stod(field, &pos));  // accepts nan/inf unlike operator>>
                if (pos != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw validation_error("embedding line " + std::to_string(line_no) +
                                       " for token '" + token + "': bad value '" + field + "'");
            }
        }
        if (static_cast<int>(values.size()) != dim) {
            throw validation_error("embedding line " + std::to_string(line_no) + " for token '" +
                                   token + "': expected " + std::to_string(dim) + " values, got " +
                                   std::to_string(values.size()));
        }
        if (!vocab.contains(token)) continue;
        const int row = vocab.index_of(token);
        for (int j = 0; j < dim; ++j) table.at(row, j) = values[static_cast<size_t>(j)];
    }
    return table;
}

}  // namespace mcted
