#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcted/corpus.hpp"

namespace mcted {

// A trigger fires type `event_type` exactly when a token has POS
// `trigger_pos`, a surface form from `trigger_lemmas`, and an outgoing arc
// labeled `relation`. Labels in generated corpora are recoverable from the
// structure alone by re-applying these rules.
struct EventSignature {
    std::string event_type;
    std::vector<std::string> trigger_lemmas;
    std::string relation;
    std::string trigger_pos;
};

struct GeneratorConfig {
    int sentence_count = 1000;
    std::vector<std::string> event_types = {"measurement", "statistics", "requirement",
                                            "operate",     "happen",     "defect"};
    int min_length = 6;
    int max_length = 12;
    // Fraction of the free token slots (between the core clause tokens and
    // the sampled target length) that get filled with modifier noise.
    double noise_rate = 1.0;
    double event_probability = 0.8;
    // Pool lemma tagged as a noun but wearing trigger-shaped arcs; only the
    // POS tag separates it from a real trigger.
    double pos_distractor_probability = 0.4;
    // Pool lemma with trigger POS whose outgoing arc is not a signature
    // relation; only the arc label separates it from a real trigger.
    double relation_distractor_probability = 0.4;
};

// Signatures for the requested event-type inventory. The default six types
// come with curated lemma pools; custom type lists get generated pools. Each
// type owns a disjoint lemma pool and one required arc relation.
std::vector<EventSignature> signatures_for(const std::vector<std::string>& event_types);

std::vector<ParsedSentence> generate_synthetic(const GeneratorConfig& config, uint64_t seed);

}  // namespace mcted
