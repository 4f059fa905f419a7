#include "mcted/synthetic.hpp"

#include <algorithm>
#include <tuple>

#include "mcted/rng.hpp"
#include "mcted/util.hpp"

namespace mcted {

namespace {

constexpr const char* kSignatureRelations[2] = {"obj", "obl"};
constexpr const char* kTriggerPos = "VB";

// One disjoint lemma pool per default event type.
const std::vector<std::vector<std::string>> kDefaultPools = {
    {"measure", "gauge", "sample", "meter"},
    {"tally", "average", "aggregate", "count"},
    {"require", "mandate", "stipulate", "specify"},
    {"switch", "adjust", "calibrate", "configure"},
    {"occur", "start", "resume", "halt"},
    {"trip", "overheat", "rupture", "corrode"},
};

const std::vector<std::string> kDeviceNouns = {"transformer", "breaker", "relay",    "feeder",
                                               "busbar",      "inverter", "capacitor", "switchgear"};
const std::vector<std::string> kAgentNouns = {"crew", "operator", "sensor", "monitor", "inspector", "technician"};
const std::vector<std::string> kReportNouns = {"bulletin", "ticket", "dispatch", "summary"};
const std::vector<std::string> kRootVerbs = {"reports", "notes", "confirms", "records"};
const std::vector<std::string> kNeutralVerbs = {"remains", "stands", "idles"};
const std::vector<std::string> kAdjectives = {"old", "faulty", "primary", "backup", "rated"};
const std::vector<std::string> kAdverbs = {"quickly", "routinely", "again", "remotely"};

struct DraftToken {
    std::string text;
    std::string pos;
    std::string label = kNoneLabel;
    int head = -1;  // draft-index of head, -1 for root
    std::string relation;
};

// A three-token clause [agent, head, device]; returns draft index of the head.
int append_clause(std::vector<DraftToken>& draft, Rng& rng, const std::string& head_text,
                  const std::string& head_pos, const std::string& device_relation,
                  const std::string& label) {
    const int agent = static_cast<int>(draft.size());
    draft.push_back({rng.pick(kAgentNouns), "NN", kNoneLabel, -1, {}});
    const int head = static_cast<int>(draft.size());
    draft.push_back({head_text, head_pos, label, -1, {}});
    const int device = static_cast<int>(draft.size());
    draft.push_back({rng.pick(kDeviceNouns), "NN", kNoneLabel, -1, {}});
    draft[static_cast<size_t>(agent)].head = head;
    draft[static_cast<size_t>(agent)].relation = "nsubj";
    draft[static_cast<size_t>(device)].head = head;
    draft[static_cast<size_t>(device)].relation = device_relation;
    return head;
}

}  // namespace

std::vector<EventSignature> signatures_for(const std::vector<std::string>& event_types) {
    if (event_types.empty()) throw contract_error("signatures_for: empty event-type inventory");
    const std::vector<std::string> defaults = GeneratorConfig{}.event_types;

    std::vector<EventSignature> sigs;
    for (size_t i = 0; i < event_types.size(); ++i) {
        EventSignature sig;
        sig.event_type = event_types[i];
        sig.relation = kSignatureRelations[i % 2];
        sig.trigger_pos = kTriggerPos;
        if (event_types == defaults) {
            sig.trigger_lemmas = kDefaultPools[i];
        } else {
            for (int k = 0; k < 3; ++k) {
                sig.trigger_lemmas.push_back("act" + std::to_string(i) + "_" + std::to_string(k));
            }
        }
        sigs.push_back(std::move(sig));
    }
    return sigs;
}

std::vector<ParsedSentence> generate_synthetic(const GeneratorConfig& config, uint64_t seed) {
    if (config.sentence_count < 0) throw contract_error("generate_synthetic: negative count");
    if (config.min_length < 2 || config.max_length < config.min_length) {
        throw contract_error("generate_synthetic: sentence length range must start at 2 or more");
    }
    const std::vector<EventSignature> sigs = signatures_for(config.event_types);
    Rng rng(derive_seed(seed, "generator"));
    std::vector<ParsedSentence> corpus;
    corpus.reserve(static_cast<size_t>(config.sentence_count));

    for (int s = 0; s < config.sentence_count; ++s) {
        const int target_len = rng.uniform_range(config.min_length, config.max_length);
        std::vector<DraftToken> draft;

        // Root clause: a report noun and the sentence root verb.
        const int subject = static_cast<int>(draft.size());
        draft.push_back({rng.pick(kReportNouns), "NN", kNoneLabel, -1, {}});
        const int root = static_cast<int>(draft.size());
        draft.push_back({rng.pick(kRootVerbs), "VB", kNoneLabel, -1, {}});
        draft[static_cast<size_t>(subject)].head = root;
        draft[static_cast<size_t>(subject)].relation = "nsubj";

        const auto room_for_clause = [&] {
            return static_cast<int>(draft.size()) + 3 <= std::max(config.max_length, 5);
        };

        std::vector<int> clause_heads;
        bool has_event = false;
        if (rng.bernoulli(config.event_probability) && room_for_clause()) {
            const EventSignature& sig = rng.pick(sigs);
            clause_heads.push_back(append_clause(draft, rng, rng.pick(sig.trigger_lemmas),
                                                 sig.trigger_pos, sig.relation, sig.event_type));
            has_event = true;
        }
        if (rng.bernoulli(config.pos_distractor_probability) && room_for_clause()) {
            // Noun homograph with the lemma's own signature relation: only the
            // POS tag separates it from a real trigger.
            const EventSignature& sig = rng.pick(sigs);
            clause_heads.push_back(append_clause(draft, rng, rng.pick(sig.trigger_lemmas), "NN",
                                                 sig.relation, kNoneLabel));
        }
        if (rng.bernoulli(config.relation_distractor_probability) && room_for_clause()) {
            // Verb homograph whose device arc is off-signature: only the arc
            // label separates it from a real trigger.
            const EventSignature& sig = rng.pick(sigs);
            clause_heads.push_back(append_clause(draft, rng, rng.pick(sig.trigger_lemmas),
                                                 kTriggerPos, "xcomp", kNoneLabel));
        }
        if (!has_event && clause_heads.empty() && room_for_clause()) {
            clause_heads.push_back(
                append_clause(draft, rng, rng.pick(kNeutralVerbs), "VB", "obj", kNoneLabel));
        }
        for (const int head : clause_heads) {
            draft[static_cast<size_t>(head)].head = root;
            draft[static_cast<size_t>(head)].relation = "ccomp";
        }

        // Modifier noise up to the sampled target length. Clause heads never
        // take modifiers: adjectives pick nouns and adverbs pick verbs, so a
        // modifier arc on a candidate token would betray its POS tag to the
        // arc-only view of the sentence.
        const auto is_clause_head = [&](int i) {
            return std::find(clause_heads.begin(), clause_heads.end(), i) != clause_heads.end();
        };
        const int slots = std::max(0, target_len - static_cast<int>(draft.size()));
        const int noise_count = static_cast<int>(std::min<double>(
            slots, std::floor(config.noise_rate * slots + 1e-9)));
        for (int k = 0; k < noise_count; ++k) {
            std::vector<int> nouns, verbs;
            for (size_t i = 0; i < draft.size(); ++i) {
                if (is_clause_head(static_cast<int>(i))) continue;
                if (draft[i].pos == "NN") nouns.push_back(static_cast<int>(i));
                if (draft[i].pos == "VB") verbs.push_back(static_cast<int>(i));
            }
            if (rng.bernoulli(0.5) && !nouns.empty()) {
                const int target = rng.pick(nouns);
                draft.push_back({rng.pick(kAdjectives), "JJ", kNoneLabel, target, "amod"});
            } else if (!verbs.empty()) {
                const int target = rng.pick(verbs);
                draft.push_back({rng.pick(kAdverbs), "RB", kNoneLabel, target, "advmod"});
            }
        }

        // Shuffle surface order, then remap arcs through the permutation.
        std::vector<int> position(draft.size());
        for (size_t i = 0; i < position.size(); ++i) position[i] = static_cast<int>(i);
        rng.shuffle(position);  // position[p] = draft index placed at p

        std::vector<int> placement(draft.size());
        for (size_t p = 0; p < position.size(); ++p) {
            placement[static_cast<size_t>(position[p])] = static_cast<int>(p);
        }

        ParsedSentence sentence;
        for (size_t p = 0; p < position.size(); ++p) {
            const DraftToken& t = draft[static_cast<size_t>(position[p])];
            sentence.tokens.push_back(t.text);
            sentence.pos_tags.push_back(t.pos);
            sentence.labels.push_back(t.label);
        }
        for (size_t i = 0; i < draft.size(); ++i) {
            const DraftToken& t = draft[i];
            if (t.head < 0) continue;
            sentence.arcs.push_back(ParsedArc{placement[static_cast<size_t>(t.head)],
                                              placement[i], t.relation});
        }
        std::sort(sentence.arcs.begin(), sentence.arcs.end(),
                  [](const ParsedArc& a, const ParsedArc& b) {
                      return std::tie(a.dependent, a.head) < std::tie(b.dependent, b.head);
                  });
        sentence.validate();
        corpus.push_back(std::move(sentence));
    }
    return corpus;
}

}  // namespace mcted
