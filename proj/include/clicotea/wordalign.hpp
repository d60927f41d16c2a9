#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clicotea/common.hpp"
#include "clicotea/corpus.hpp"
#include "clicotea/matrix.hpp"
#include "clicotea/tokenizer.hpp"

namespace clicotea::wordalign {

/// (source word index, target word index)
using Link = std::pair<int, int>;
using WordSpans = std::vector<std::pair<int, int>>;

struct AlignmentSet {
    std::vector<Link> links;  // sorted, no duplicates
    int src_word_count = 0;
    int tgt_word_count = 0;

    void validate() const {
        for (std::size_t i = 0; i < links.size(); ++i) {
            const auto& [s, t] = links[i];
            if (s < 0 || s >= src_word_count || t < 0 || t >= tgt_word_count)
                throw std::invalid_argument("alignment link out of bounds");
            if (i > 0 && links[i] <= links[i - 1]) throw std::invalid_argument("alignment links not sorted/unique");
        }
    }
};

enum class PoolingStrategy { leftmost, mean };

inline std::string to_string(PoolingStrategy p) { return p == PoolingStrategy::leftmost ? "leftmost" : "mean"; }
inline PoolingStrategy pooling_from_string(const std::string& s) {
    if (s == "leftmost") return PoolingStrategy::leftmost;
    if (s == "mean") return PoolingStrategy::mean;
    throw std::invalid_argument("unknown pooling strategy: " + s);
}

/// Word links from subword similarity: P = row-softmax(S) * col-softmax(S)
/// elementwise over raw dot products; a subword pair survives iff P > tau,
/// and a word pair is linked iff any of its subword pairs survives. Rows
/// outside word spans (the CLS slot) never participate.
template <typename Scalar>
AlignmentSet extract_alignments(const Mat<Scalar>& src_embs, const WordSpans& src_spans, const Mat<Scalar>& tgt_embs,
                                const WordSpans& tgt_spans, double threshold) {
    if (src_embs.cols != tgt_embs.cols) throw std::invalid_argument("extract_alignments: dimension mismatch");
    // flatten spans into (token row, word index) lists
    auto flatten = [](const WordSpans& spans, std::size_t rows) {
        std::vector<std::pair<int, int>> out;  // (row, word)
        for (std::size_t w = 0; w < spans.size(); ++w) {
            const auto& [start, end] = spans[w];
            if (start < 1 || end <= start || static_cast<std::size_t>(end) > rows)
                throw std::invalid_argument("extract_alignments: invalid word span");
            for (int r = start; r < end; ++r) out.emplace_back(r, static_cast<int>(w));
        }
        return out;
    };
    const auto src_tok = flatten(src_spans, src_embs.rows);
    const auto tgt_tok = flatten(tgt_spans, tgt_embs.rows);

    AlignmentSet result;
    result.src_word_count = static_cast<int>(src_spans.size());
    result.tgt_word_count = static_cast<int>(tgt_spans.size());
    if (src_tok.empty() || tgt_tok.empty()) return result;

    const std::size_t ns = src_tok.size(), nt = tgt_tok.size();
    Mat<double> scores(ns, nt);
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < nt; ++j)
            scores(i, j) = static_cast<double>(
                dot(src_embs.row(static_cast<std::size_t>(src_tok[i].first)),
                    tgt_embs.row(static_cast<std::size_t>(tgt_tok[j].first)), src_embs.cols));

    auto softmax_rows = [](const Mat<double>& m) {
        Mat<double> out(m.rows, m.cols);
        for (std::size_t i = 0; i < m.rows; ++i) {
            double mx = m(i, 0);
            for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, m(i, j));
            double sum = 0;
            for (std::size_t j = 0; j < m.cols; ++j) {
                out(i, j) = std::exp(m(i, j) - mx);
                sum += out(i, j);
            }
            for (std::size_t j = 0; j < m.cols; ++j) out(i, j) /= sum;
        }
        return out;
    };
    Mat<double> fwd = softmax_rows(scores);
    Mat<double> scores_t(nt, ns);
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < nt; ++j) scores_t(j, i) = scores(i, j);
    Mat<double> bwd = softmax_rows(scores_t);

    std::set<Link> linked;
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < nt; ++j)
            if (fwd(i, j) * bwd(j, i) > threshold) linked.insert({src_tok[i].second, tgt_tok[j].second});
    result.links.assign(linked.begin(), linked.end());
    return result;
}

/// Drops many-to-many links: degrees are counted once on the input, and a
/// link survives iff its source or its target has degree 1.
inline AlignmentSet filter_alignments(const AlignmentSet& set) {
    std::map<int, int> src_deg, tgt_deg;
    for (const auto& [s, t] : set.links) {
        ++src_deg[s];
        ++tgt_deg[t];
    }
    AlignmentSet out;
    out.src_word_count = set.src_word_count;
    out.tgt_word_count = set.tgt_word_count;
    for (const auto& link : set.links)
        if (src_deg[link.first] == 1 || tgt_deg[link.second] == 1) out.links.push_back(link);
    return out;
}

enum class FilterDecision { apply_filter, bypass_filter };

/// Bypasses filtering when it would retain less than min_fraction of links.
inline FilterDecision retention_guard(std::size_t before_count, std::size_t after_count, double min_fraction = 0.03) {
    if (after_count > before_count) throw std::invalid_argument("retention_guard: filtered count exceeds input count");
    if (before_count > 0 &&
        static_cast<double>(after_count) / static_cast<double>(before_count) < min_fraction)
        return FilterDecision::bypass_filter;
    return FilterDecision::apply_filter;
}

/// Filter plus retention guard: returns the links to train on and whether the
/// guard bypassed the filter.
inline std::pair<AlignmentSet, bool> filter_with_guard(const AlignmentSet& set, double min_fraction = 0.03) {
    AlignmentSet filtered = filter_alignments(set);
    if (retention_guard(set.links.size(), filtered.links.size(), min_fraction) == FilterDecision::bypass_filter)
        return {set, true};
    return {filtered, false};
}

template <typename Scalar>
std::vector<Scalar> pool_word_embedding(const std::pair<int, int>& word_span, const Mat<Scalar>& embs,
                                        PoolingStrategy strategy) {
    const auto& [start, end] = word_span;
    if (start < 0 || end <= start || static_cast<std::size_t>(end) > embs.rows)
        throw std::invalid_argument("pool_word_embedding: empty or invalid span");
    std::vector<Scalar> out(embs.cols, Scalar(0));
    if (strategy == PoolingStrategy::leftmost) {
        const Scalar* r = embs.row(static_cast<std::size_t>(start));
        out.assign(r, r + embs.cols);
    } else {
        for (int i = start; i < end; ++i) {
            const Scalar* r = embs.row(static_cast<std::size_t>(i));
            for (std::size_t j = 0; j < embs.cols; ++j) out[j] += r[j];
        }
        const Scalar inv = Scalar(1) / static_cast<Scalar>(end - start);
        for (auto& v : out) v *= inv;
    }
    return out;
}

/// Rows and weights realizing a pooling strategy over a span, for callers
/// that need the pooled vector as a linear form instead of a value.
inline std::vector<std::pair<int, double>> pooling_row_weights(const std::pair<int, int>& word_span,
                                                               PoolingStrategy strategy) {
    const auto& [start, end] = word_span;
    if (start < 0 || end <= start) throw std::invalid_argument("pooling_row_weights: empty or invalid span");
    if (strategy == PoolingStrategy::leftmost) return {{start, 1.0}};
    std::vector<std::pair<int, double>> out;
    const double w = 1.0 / static_cast<double>(end - start);
    for (int i = start; i < end; ++i) out.emplace_back(i, w);
    return out;
}

// ---------------------------------------------------------------------------
// Per-pair alignment records and the JSONL dump
// ---------------------------------------------------------------------------

struct AlignmentRecord {
    std::int64_t pair_id = 0;
    std::vector<Link> links;  // the links to train on (post-filter, or raw when bypassed)
    bool filtered = false;    // whether the many-to-many filter was applied
    bool bypassed = false;    // whether the retention guard bypassed the filter
};

inline nlohmann::json record_to_json(const AlignmentRecord& rec) {
    nlohmann::json j;
    j["id"] = rec.pair_id;
    nlohmann::json links = nlohmann::json::array();
    for (const auto& [s, t] : rec.links) links.push_back({s, t});
    j["links"] = links;
    j["filtered"] = rec.filtered;
    j["bypassed"] = rec.bypassed;
    return j;
}

inline AlignmentRecord record_from_json(const nlohmann::json& j) {
    AlignmentRecord rec;
    rec.pair_id = j.at("id").get<std::int64_t>();
    for (const auto& l : j.at("links")) rec.links.emplace_back(l.at(0).get<int>(), l.at(1).get<int>());
    rec.filtered = j.at("filtered").get<bool>();
    rec.bypassed = j.at("bypassed").get<bool>();
    return rec;
}

inline void save_alignments(const std::filesystem::path& path, const std::vector<AlignmentRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        out += record_to_json(rec).dump();
        out += '\n';
    }
    atomic_write_file(path, out);
}

inline std::vector<AlignmentRecord> load_alignments(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::vector<AlignmentRecord> records;
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": malformed alignment record: " + e.what());
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Scoring against reference links
// ---------------------------------------------------------------------------

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t predicted = 0;
    std::size_t reference = 0;
    std::size_t matched = 0;
};

inline PrecisionRecall score_links(const std::vector<Link>& predicted, const std::vector<Link>& reference) {
    const std::set<Link> pred(predicted.begin(), predicted.end());
    const std::set<Link> ref(reference.begin(), reference.end());
    PrecisionRecall pr;
    pr.predicted = pred.size();
    pr.reference = ref.size();
    for (const auto& link : pred) pr.matched += ref.count(link);
    pr.precision = pr.predicted ? static_cast<double>(pr.matched) / static_cast<double>(pr.predicted) : 0.0;
    pr.recall = pr.reference ? static_cast<double>(pr.matched) / static_cast<double>(pr.reference) : 0.0;
    pr.f1 = (pr.precision + pr.recall) > 0 ? 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall) : 0.0;
    return pr;
}

}  // namespace clicotea::wordalign
