#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "clicotea/common.hpp"
#include "clicotea/corpus.hpp"

namespace clicotea::tokenizer {

inline constexpr const char* kContinuation = "##";

struct SpecialIds {
    int pad = 0;
    int unk = 1;
    int cls = 2;
    int sep = 3;
    int mask = 4;
    static constexpr int count = 5;
};

struct Vocabulary {
    std::map<std::string, int> entries;  // subword -> id, ids dense in [SpecialIds::count, size)
    SpecialIds specials;

    int size() const { return static_cast<int>(entries.size()) + SpecialIds::count; }

    bool contains(const std::string& unit) const { return entries.count(unit) != 0; }

    void validate() const {
        std::set<int> ids;
        for (const auto& [unit, id] : entries) {
            if (unit.empty()) throw std::invalid_argument("empty vocabulary unit");
            if (id < SpecialIds::count || id >= size()) throw std::invalid_argument("vocabulary id out of range");
            if (!ids.insert(id).second) throw std::invalid_argument("duplicate vocabulary id");
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["entries"] = entries;
        j["specials"] = {{"pad", specials.pad}, {"unk", specials.unk}, {"cls", specials.cls},
                         {"sep", specials.sep}, {"mask", specials.mask}};
        return j;
    }

    static Vocabulary from_json(const nlohmann::json& j) {
        Vocabulary v;
        v.entries = j.at("entries").get<std::map<std::string, int>>();
        const auto& s = j.at("specials");
        v.specials.pad = s.at("pad").get<int>();
        v.specials.unk = s.at("unk").get<int>();
        v.specials.cls = s.at("cls").get<int>();
        v.specials.sep = s.at("sep").get<int>();
        v.specials.mask = s.at("mask").get<int>();
        v.validate();
        return v;
    }

    void save(const std::filesystem::path& path) const { atomic_write_file(path, to_json().dump(2) + "\n"); }

    static Vocabulary load(const std::filesystem::path& path) {
        return from_json(nlohmann::json::parse(read_text_file(path)));
    }
};

struct TokenizedText {
    corpus::Words words;
    std::vector<int> token_ids;                   // leading CLS at index 0
    std::vector<std::pair<int, int>> word_spans;  // [start, end) into token_ids, one per word
};

namespace detail {

inline std::string strip_marker(const std::string& unit) {
    if (unit.rfind(kContinuation, 0) == 0) return unit.substr(2);
    return unit;
}

inline std::vector<std::string> word_to_units(const std::string& word) {
    std::vector<std::string> units;
    for (std::size_t i = 0; i < word.size(); ++i) {
        std::string u = (i == 0) ? std::string() : std::string(kContinuation);
        u += word[i];
        units.push_back(std::move(u));
    }
    return units;
}

inline std::string lowercased(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

}  // namespace detail

/// Builds a subword vocabulary by iterative frequency-based merging of
/// adjacent units, starting from single characters. Ties in pair frequency
/// break lexicographically, so the result depends only on the corpus content.
inline Vocabulary train_vocab(const std::vector<std::string>& sentences, int target_size, bool lowercase = false) {
    if (sentences.empty()) throw std::invalid_argument("train_vocab: empty corpus");

    std::map<std::string, long long> word_freq;
    for (const auto& s : sentences)
        for (const auto& w : corpus::split_words(lowercase ? detail::lowercased(s) : s)) ++word_freq[w];
    if (word_freq.empty()) throw std::invalid_argument("train_vocab: corpus contains no words");

    std::vector<std::vector<std::string>> word_units;
    std::vector<long long> freqs;
    for (const auto& [w, f] : word_freq) {
        word_units.push_back(detail::word_to_units(w));
        freqs.push_back(f);
    }

    std::set<std::string> initial;
    for (const auto& units : word_units)
        for (const auto& u : units) initial.insert(u);

    const int floor_size = SpecialIds::count + static_cast<int>(initial.size());
    if (target_size < floor_size)
        throw std::invalid_argument("train_vocab: target_size " + std::to_string(target_size) +
                                    " below minimum " + std::to_string(floor_size));

    Vocabulary vocab;
    int next_id = SpecialIds::count;
    for (const auto& u : initial) vocab.entries[u] = next_id++;

    while (vocab.size() < target_size) {
        std::map<std::pair<std::string, std::string>, long long> pair_freq;
        for (std::size_t w = 0; w < word_units.size(); ++w) {
            const auto& units = word_units[w];
            for (std::size_t i = 0; i + 1 < units.size(); ++i)
                pair_freq[{units[i], units[i + 1]}] += freqs[w];
        }
        if (pair_freq.empty()) break;

        std::pair<std::string, std::string> best;
        long long best_count = -1;
        for (const auto& [pr, count] : pair_freq) {
            if (count > best_count) {  // map iteration is ordered, so ties keep the smallest pair
                best = pr;
                best_count = count;
            }
        }

        const std::string merged = best.first + detail::strip_marker(best.second);
        if (vocab.contains(merged)) break;  // would not grow the vocabulary
        vocab.entries[merged] = next_id++;

        for (auto& units : word_units) {
            std::vector<std::string> rewritten;
            rewritten.reserve(units.size());
            for (std::size_t i = 0; i < units.size(); ++i) {
                if (i + 1 < units.size() && units[i] == best.first && units[i + 1] == best.second) {
                    rewritten.push_back(merged);
                    ++i;
                } else {
                    rewritten.push_back(units[i]);
                }
            }
            units = std::move(rewritten);
        }
    }
    // IDs above follow merge discovery order; renumber lexicographically so
    // vocabularies trained on different corpora agree whenever their entry
    // sets agree.
    int id = SpecialIds::count;
    for (auto& [unit, entry_id] : vocab.entries) entry_id = id++;
    vocab.validate();
    return vocab;
}

/// Greedy longest-match segmentation. A word with no match at some position
/// collapses to a single UNK token. CLS is always prepended at position 0.
inline TokenizedText tokenize(const corpus::Words& words, const Vocabulary& vocab, bool lowercase = false) {
    TokenizedText out;
    out.words = words;
    out.token_ids.push_back(vocab.specials.cls);
    for (const auto& raw : words) {
        const std::string word = lowercase ? detail::lowercased(raw) : raw;
        const int start = static_cast<int>(out.token_ids.size());
        std::vector<int> piece_ids;
        std::size_t pos = 0;
        bool ok = !word.empty();
        while (ok && pos < word.size()) {
            int matched_id = -1;
            std::size_t matched_len = 0;
            for (std::size_t len = word.size() - pos; len >= 1; --len) {
                std::string unit = (pos == 0) ? std::string() : std::string(kContinuation);
                unit += word.substr(pos, len);
                auto it = vocab.entries.find(unit);
                if (it != vocab.entries.end()) {
                    matched_id = it->second;
                    matched_len = len;
                    break;
                }
            }
            if (matched_id < 0) {
                ok = false;
                break;
            }
            piece_ids.push_back(matched_id);
            pos += matched_len;
        }
        if (!ok) {
            out.token_ids.push_back(vocab.specials.unk);
            out.word_spans.emplace_back(start, start + 1);
        } else {
            out.token_ids.insert(out.token_ids.end(), piece_ids.begin(), piece_ids.end());
            out.word_spans.emplace_back(start, start + static_cast<int>(piece_ids.size()));
        }
    }
    return out;
}

inline TokenizedText tokenize_text(const std::string& text, const Vocabulary& vocab, bool lowercase = false) {
    return tokenize(corpus::split_words(text), vocab, lowercase);
}

}  // namespace clicotea::tokenizer
