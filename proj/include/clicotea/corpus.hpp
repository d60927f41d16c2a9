#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clicotea/common.hpp"

namespace clicotea::corpus {

using Words = std::vector<std::string>;
using Link = std::pair<int, int>;  // (source word index, target word index)

struct LanguageTag {
    std::string code;
};

enum class Split { train, validation, test };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    throw std::logic_error("bad split");
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split: " + s);
}

struct ParallelPair {
    std::int64_t id = 0;
    std::string source_text;
    std::string target_text;
    std::optional<std::vector<Link>> gold_alignment;
    Split split = Split::train;
};

struct SyntheticTranslatorConfig {
    std::map<std::string, std::string> lexicon;  // bijective word map L1 -> L2
    int permutation_window = 0;
    double drop_prob = 0.0;
    double duplicate_prob = 0.0;
    double substitution_prob = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (permutation_window < 0) throw std::invalid_argument("permutation_window must be >= 0");
        for (double p : {drop_prob, duplicate_prob, substitution_prob})
            if (p < 0.0 || p > 1.0) throw std::invalid_argument("noise probability outside [0,1]");
        std::set<std::string> targets;
        for (const auto& [src, tgt] : lexicon) {
            if (src.empty() || tgt.empty()) throw std::invalid_argument("lexicon entries must be non-empty");
            if (!targets.insert(tgt).second)
                throw std::invalid_argument("lexicon is not bijective: duplicate target '" + tgt + "'");
        }
    }
};

struct CorpusStats {
    std::size_t total_sentences = 0;
    double avg_aligned_tokens = 0.0;
};

inline Words split_words(const std::string& text) {
    Words out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ') ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string join_words(const Words& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic translation. Decomposed into pure steps so each rule is testable
// in isolation; generate_synthetic_pair composes them with a seeded RNG.
// ---------------------------------------------------------------------------

inline Words apply_lexicon(const Words& source, const std::map<std::string, std::string>& lexicon) {
    Words out;
    out.reserve(source.size());
    for (const auto& w : source) {
        auto it = lexicon.find(w);
        if (it == lexicon.end()) throw std::invalid_argument("word not in lexicon: " + w);
        out.push_back(it->second);
    }
    return out;
}

/// Bounded-swap local shuffle. perm[t] is the source index placed at target
/// position t; window 0 yields the identity.
inline std::vector<int> sample_window_permutation(std::size_t n, int window, Rng& rng) {
    std::vector<int> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
    if (window <= 0) return perm;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t reach = std::min<std::size_t>(static_cast<std::size_t>(window), n - 1 - i);
        const std::size_t j = i + rng.next_index(reach + 1);
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

/// Reorders lexicon-mapped words by perm and emits the positional gold links.
inline std::pair<Words, std::vector<Link>> permute_target(const Words& mapped, const std::vector<int>& perm) {
    if (mapped.size() != perm.size()) throw std::invalid_argument("permutation length mismatch");
    std::vector<bool> seen(perm.size(), false);
    Words out(perm.size());
    std::vector<Link> links;
    links.reserve(perm.size());
    for (std::size_t t = 0; t < perm.size(); ++t) {
        const int s = perm[t];
        if (s < 0 || static_cast<std::size_t>(s) >= perm.size() || seen[static_cast<std::size_t>(s)])
            throw std::invalid_argument("perm is not a permutation");
        seen[static_cast<std::size_t>(s)] = true;
        out[t] = mapped[static_cast<std::size_t>(s)];
        links.emplace_back(s, static_cast<int>(t));
    }
    std::sort(links.begin(), links.end());
    return {std::move(out), std::move(links)};
}

/// Per-target-word noise decision. substitute_with empty means no substitution.
struct NoiseDecision {
    bool drop = false;
    bool duplicate = false;
    std::string substitute_with;
};

/// Applies noise decisions to a permuted target. Dropped and substituted words
/// lose their gold link (their source word has no surviving translation);
/// duplicated words keep a link to each copy.
inline std::pair<Words, std::vector<Link>> apply_noise(const Words& target, const std::vector<int>& source_of_pos,
                                                       const std::vector<NoiseDecision>& decisions) {
    if (target.size() != source_of_pos.size() || target.size() != decisions.size())
        throw std::invalid_argument("apply_noise: length mismatch");
    Words out;
    std::vector<Link> links;
    for (std::size_t t = 0; t < target.size(); ++t) {
        const NoiseDecision& d = decisions[t];
        if (d.drop) continue;
        const bool substituted = !d.substitute_with.empty();
        const std::string& word = substituted ? d.substitute_with : target[t];
        const int copies = d.duplicate ? 2 : 1;
        for (int c = 0; c < copies; ++c) {
            if (!substituted) links.emplace_back(source_of_pos[t], static_cast<int>(out.size()));
            out.push_back(word);
        }
    }
    std::sort(links.begin(), links.end());
    return {std::move(out), std::move(links)};
}

inline std::vector<NoiseDecision> sample_noise_decisions(const Words& target, const SyntheticTranslatorConfig& cfg,
                                                         const std::vector<std::string>& target_inventory, Rng& rng) {
    std::vector<NoiseDecision> out(target.size());
    for (std::size_t t = 0; t < target.size(); ++t) {
        NoiseDecision& d = out[t];
        if (rng.bernoulli(cfg.drop_prob)) {
            d.drop = true;
            continue;
        }
        if (rng.bernoulli(cfg.substitution_prob) && target_inventory.size() > 1) {
            std::string pick;
            do {
                pick = target_inventory[rng.next_index(target_inventory.size())];
            } while (pick == target[t]);
            d.substitute_with = pick;
        }
        d.duplicate = rng.bernoulli(cfg.duplicate_prob);
    }
    return out;
}

inline ParallelPair generate_synthetic_pair(const Words& source, const SyntheticTranslatorConfig& cfg) {
    if (source.empty()) throw std::invalid_argument("generate_synthetic_pair: empty source sentence");
    cfg.validate();
    Rng rng(cfg.seed);

    const Words mapped = apply_lexicon(source, cfg.lexicon);
    const std::vector<int> perm = sample_window_permutation(source.size(), cfg.permutation_window, rng);
    auto [permuted, perm_links] = permute_target(mapped, perm);

    std::vector<int> source_of_pos(perm.begin(), perm.end());
    std::vector<std::string> inventory;
    inventory.reserve(cfg.lexicon.size());
    for (const auto& [src, tgt] : cfg.lexicon) inventory.push_back(tgt);

    const auto decisions = sample_noise_decisions(permuted, cfg, inventory, rng);
    auto [target, links] = apply_noise(permuted, source_of_pos, decisions);

    ParallelPair pair;
    pair.source_text = join_words(source);
    pair.target_text = join_words(target);
    pair.gold_alignment = std::move(links);
    return pair;
}

// ---------------------------------------------------------------------------
// Corpus file IO: one JSON object per line,
// {"id", "src", "tgt", "gold": [[s,t],...] | null, "split"} in UTF-8 with LF.
// ---------------------------------------------------------------------------

inline void validate_pair(const ParallelPair& p, const std::string& where) {
    if (p.gold_alignment) {
        const int src_n = static_cast<int>(split_words(p.source_text).size());
        const int tgt_n = static_cast<int>(split_words(p.target_text).size());
        for (const auto& [s, t] : *p.gold_alignment) {
            if (s < 0 || s >= src_n || t < 0 || t >= tgt_n)
                throw std::runtime_error(where + ": alignment index (" + std::to_string(s) + "," +
                                         std::to_string(t) + ") out of bounds");
        }
    }
}

inline nlohmann::json pair_to_json(const ParallelPair& p) {
    nlohmann::json j;
    j["id"] = p.id;
    j["src"] = p.source_text;
    j["tgt"] = p.target_text;
    if (p.gold_alignment) {
        nlohmann::json links = nlohmann::json::array();
        for (const auto& [s, t] : *p.gold_alignment) links.push_back({s, t});
        j["gold"] = links;
    } else {
        j["gold"] = nullptr;
    }
    j["split"] = to_string(p.split);
    return j;
}

inline ParallelPair pair_from_json(const nlohmann::json& j) {
    ParallelPair p;
    p.id = j.at("id").get<std::int64_t>();
    p.source_text = j.at("src").get<std::string>();
    p.target_text = j.at("tgt").get<std::string>();
    if (!j.at("gold").is_null()) {
        std::vector<Link> links;
        for (const auto& l : j.at("gold")) {
            if (!l.is_array() || l.size() != 2) throw std::runtime_error("gold link is not a [s,t] pair");
            links.emplace_back(l[0].get<int>(), l[1].get<int>());
        }
        p.gold_alignment = std::move(links);
    }
    p.split = split_from_string(j.at("split").get<std::string>());
    return p;
}

inline std::vector<ParallelPair> load_parallel_corpus(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw std::runtime_error("corpus file not found: " + path.string());
    const std::string text = read_text_file(path);
    std::vector<ParallelPair> out;
    std::set<std::int64_t> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        const std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = (eol == std::string::npos) ? text.size() + 1 : eol + 1;
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path.filename().string() + ":" + std::to_string(line_no);
        ParallelPair p;
        try {
            p = pair_from_json(nlohmann::json::parse(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(where + ": malformed record: " + e.what());
        }
        validate_pair(p, where);
        if (!ids.insert(p.id).second) throw std::runtime_error(where + ": duplicate id " + std::to_string(p.id));
        out.push_back(std::move(p));
    }
    return out;
}

inline std::string corpus_to_jsonl(const std::vector<ParallelPair>& pairs) {
    std::string out;
    for (const auto& p : pairs) {
        out += pair_to_json(p).dump();
        out += '\n';
    }
    return out;
}

inline void save_parallel_corpus(const std::filesystem::path& path, const std::vector<ParallelPair>& pairs) {
    atomic_write_file(path, corpus_to_jsonl(pairs));
}

inline CorpusStats corpus_statistics(const std::vector<ParallelPair>& pairs) {
    CorpusStats stats;
    stats.total_sentences = pairs.size();
    if (pairs.empty()) return stats;
    std::size_t total_links = 0;
    for (const auto& p : pairs) {
        if (!p.gold_alignment)
            throw std::invalid_argument("corpus_statistics: pair " + std::to_string(p.id) + " has no alignment");
        total_links += p.gold_alignment->size();
    }
    stats.avg_aligned_tokens = static_cast<double>(total_links) / static_cast<double>(pairs.size());
    return stats;
}

// ---------------------------------------------------------------------------
// Synthetic language pair. L1 words are generated syllable stems plus three
// small sets of class-marker words. Stems pair up by index (stem 2m with stem
// 2m+1) into fixed couples, and every sentence contains whole couples in
// shuffled order, so a masked stem is recoverable from context as the partner
// of the one unpaired stem present. That gives masked-token pretraining a
// learnable objective whose optimum requires representing each stem's exact
// identity, while keeping stem co-occurrence otherwise uniform.
//
// A configurable fraction of the stems are loanwords kept verbatim in L2; the
// remaining stems translate to L2-exclusive forms, so cross-lingual token
// identity holds for most words while the rest must be bridged by context.
// Markers are always loanwords. Each sentence carries exactly one marker,
// which defines the 3-way classification label.
// ---------------------------------------------------------------------------

struct SyntheticLanguageConfig {
    int num_stems = 120;
    int markers_per_class = 2;
    double loanword_fraction = 1.0;
    std::uint64_t seed = 7;
};

inline constexpr int kNumClasses = 3;

struct SyntheticLanguage {
    std::vector<std::string> stems;
    std::vector<std::vector<std::string>> marker_sets;   // kNumClasses sets
    std::map<std::string, std::string> lexicon;          // every L1 word -> L2 word

    /// Class label of an L1 sentence: the index of the marker set whose word
    /// appears. Exactly one marker word is expected.
    int label_of(const Words& l1_words) const {
        int found = -1;
        for (const auto& w : l1_words) {
            for (int c = 0; c < kNumClasses; ++c) {
                if (std::find(marker_sets[c].begin(), marker_sets[c].end(), w) != marker_sets[c].end()) {
                    if (found != -1 && found != c) throw std::runtime_error("sentence has markers of two classes");
                    found = c;
                }
            }
        }
        if (found == -1) throw std::runtime_error("sentence has no marker word: " + join_words(l1_words));
        return found;
    }
};

inline SyntheticLanguage build_language(const SyntheticLanguageConfig& cfg) {
    if (cfg.num_stems < 4) throw std::invalid_argument("num_stems must be >= 4");
    if (cfg.num_stems % 2 != 0) throw std::invalid_argument("num_stems must be even (stems pair into couples)");
    if (cfg.markers_per_class < 1) throw std::invalid_argument("markers_per_class must be >= 1");
    if (cfg.loanword_fraction < 0.0 || cfg.loanword_fraction > 1.0)
        throw std::invalid_argument("loanword_fraction must be in [0,1]");
    static const std::string consonants = "bdfgklmnprstv";
    static const std::string vowels = "aeio";
    const int cvc_space = static_cast<int>(consonants.size() * vowels.size() * consonants.size());
    // Worst case needs prefixes for L1 stems, their L2-exclusive forms, and markers.
    if (2 * cfg.num_stems + kNumClasses * cfg.markers_per_class > cvc_space / 2)
        throw std::invalid_argument("word inventory too large for the syllable space");

    Rng rng(cfg.seed);
    SyntheticLanguage lang;
    auto make_cvc = [&] {
        std::string w;
        w += consonants[rng.next_index(consonants.size())];
        w += vowels[rng.next_index(vowels.size())];
        w += consonants[rng.next_index(consonants.size())];
        return w;
    };

    // All stems are CVCV with pairwise distinct CVC prefixes, so no word is a
    // prefix of another and trained subword vocabularies settle on whole-word
    // tokens. Markers are CVC words disjoint from every stem prefix.
    std::set<std::string> prefixes;
    auto make_stem = [&] {
        for (;;) {
            std::string prefix = make_cvc();
            if (prefixes.insert(prefix).second) return prefix + vowels[rng.next_index(vowels.size())];
        }
    };
    for (int i = 0; i < cfg.num_stems; ++i) lang.stems.push_back(make_stem());
    lang.marker_sets.resize(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) {
        while (static_cast<int>(lang.marker_sets[c].size()) < cfg.markers_per_class) {
            std::string w = make_cvc();
            if (prefixes.insert(w).second) lang.marker_sets[c].push_back(std::move(w));
        }
    }
    // The first loan_count stems and all markers are loanwords (identical in
    // L2); the remaining stems map to fresh L2-exclusive forms. L2 forms are
    // drawn after the full L1 inventory so changing the fraction never changes
    // the L1 side.
    const int loan_count =
        static_cast<int>(std::llround(cfg.loanword_fraction * static_cast<double>(cfg.num_stems)));
    for (int i = 0; i < cfg.num_stems; ++i) {
        const std::string& s = lang.stems[static_cast<std::size_t>(i)];
        lang.lexicon[s] = (i < loan_count) ? s : make_stem();
    }
    for (const auto& set : lang.marker_sets)
        for (const auto& m : set) lang.lexicon[m] = m;
    return lang;
}

/// Samples an L1 sentence: whole stem couples drawn without replacement plus
/// one marker word, all in shuffled order. Word order carries no information,
/// so trained models cannot lean on position to identify words, and sentence
/// length is always odd (2 * couples + 1).
inline Words sample_sentence(const SyntheticLanguage& lang, int min_words, int max_words, Rng& rng) {
    if (min_words < 2 || max_words < min_words) throw std::invalid_argument("bad sentence length bounds");
    const int couples_min = std::max(1, min_words / 2);
    const int couples_max = (max_words - 1) / 2;
    if (couples_max < couples_min) throw std::invalid_argument("length bounds leave no room for stem couples");
    const std::size_t couple_count = lang.stems.size() / 2;
    if (couple_count < static_cast<std::size_t>(couples_max))
        throw std::invalid_argument("sentence length exceeds couple inventory");

    const int c = rng.next_int(couples_min, couples_max);
    const int cls = rng.next_int(0, kNumClasses - 1);
    const auto& markers = lang.marker_sets[static_cast<std::size_t>(cls)];

    Words sentence;
    sentence.push_back(markers[rng.next_index(markers.size())]);
    std::set<std::size_t> taken;
    for (int i = 0; i < c; ++i) {
        std::size_t couple;
        do {
            couple = rng.next_index(couple_count);
        } while (!taken.insert(couple).second);
        sentence.push_back(lang.stems[2 * couple]);
        sentence.push_back(lang.stems[2 * couple + 1]);
    }
    for (std::size_t i = sentence.size() - 1; i > 0; --i)
        std::swap(sentence[i], sentence[rng.next_index(i + 1)]);
    return sentence;
}

struct SyntheticCorpusConfig {
    SyntheticLanguageConfig language;
    int num_train = 20000;
    int num_validation = 500;
    int num_test = 500;
    int sentence_min_words = 5;
    int sentence_max_words = 9;
    int permutation_window = 2;
    double drop_prob = 0.0;
    double duplicate_prob = 0.0;
    double substitution_prob = 0.0;
    std::uint64_t seed = 42;
};

inline std::vector<ParallelPair> generate_corpus(const SyntheticCorpusConfig& cfg) {
    const SyntheticLanguage lang = build_language(cfg.language);
    SyntheticTranslatorConfig tr;
    tr.lexicon = lang.lexicon;
    tr.permutation_window = cfg.permutation_window;
    tr.drop_prob = cfg.drop_prob;
    tr.duplicate_prob = cfg.duplicate_prob;
    tr.substitution_prob = cfg.substitution_prob;
    tr.validate();

    std::vector<ParallelPair> pairs;
    const int total = cfg.num_train + cfg.num_validation + cfg.num_test;
    pairs.reserve(static_cast<std::size_t>(total));
    Rng sentence_rng(derive_seed(cfg.seed, "sentences"));
    for (int i = 0; i < total; ++i) {
        const Words source = sample_sentence(lang, cfg.sentence_min_words, cfg.sentence_max_words, sentence_rng);
        SyntheticTranslatorConfig per_pair = tr;
        per_pair.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        ParallelPair p = generate_synthetic_pair(source, per_pair);
        p.id = i;
        p.split = (i < cfg.num_train)                      ? Split::train
                  : (i < cfg.num_train + cfg.num_validation) ? Split::validation
                                                             : Split::test;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

inline std::vector<ParallelPair> filter_split(const std::vector<ParallelPair>& pairs, Split split) {
    std::vector<ParallelPair> out;
    for (const auto& p : pairs)
        if (p.split == split) out.push_back(p);
    return out;
}

}  // namespace clicotea::corpus
