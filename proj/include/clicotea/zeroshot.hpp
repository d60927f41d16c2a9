#pragma once

#include <algorithm>
#include <cstring>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "clicotea/common.hpp"
#include "clicotea/corpus.hpp"
#include "clicotea/encoder.hpp"
#include "clicotea/matrix.hpp"
#include "clicotea/tokenizer.hpp"

namespace clicotea::zeroshot {

/// Downstream stand-in: a text encoder plus an optional linear head. Only the
/// text encoder is ever swapped; the head stays fixed.
template <typename Scalar>
struct DownstreamModel {
    encoder::EncoderBundle<Scalar> text_encoder;
    Mat<Scalar> head;  // (d+1) x num_classes with bias row; empty when headless
    std::string task_tag;

    bool has_head() const { return head.size() > 0; }
};

template <typename Scalar>
DownstreamModel<Scalar> swap_text_encoder(DownstreamModel<Scalar> model, const encoder::EncoderBundle<Scalar>& student) {
    if (student.config.hidden_dim != model.text_encoder.config.hidden_dim)
        throw std::invalid_argument("swap_text_encoder: hidden dimension mismatch");
    if (model.has_head() && model.head.rows != static_cast<std::size_t>(student.config.hidden_dim) + 1)
        throw std::invalid_argument("swap_text_encoder: head input dimension mismatch");
    model.text_encoder = student;
    return model;
}

struct RetrievalGold {
    std::vector<int> anchor_of;  // query index -> gold anchor index

    void validate(std::size_t num_anchors) const {
        if (anchor_of.size() != num_anchors) throw std::invalid_argument("retrieval gold size mismatch");
        std::vector<bool> hit(num_anchors, false);
        for (const int a : anchor_of) {
            if (a < 0 || static_cast<std::size_t>(a) >= num_anchors || hit[static_cast<std::size_t>(a)])
                throw std::invalid_argument("retrieval gold is not a bijection");
            hit[static_cast<std::size_t>(a)] = true;
        }
    }
};

inline RetrievalGold identity_gold(std::size_t n) {
    RetrievalGold g;
    g.anchor_of.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.anchor_of[i] = static_cast<int>(i);
    return g;
}

/// Fraction of queries whose gold anchor ranks in the top k by cosine
/// similarity. Ties rank the lower anchor index first.
template <typename Scalar>
double recall_at_k(const Mat<Scalar>& query_embs, const Mat<Scalar>& anchor_embs, const RetrievalGold& gold, int k) {
    if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
    if (query_embs.cols != anchor_embs.cols) throw std::invalid_argument("recall_at_k: dimension mismatch");
    if (query_embs.rows == 0) throw std::invalid_argument("recall_at_k: empty query set");
    gold.validate(anchor_embs.rows);
    if (gold.anchor_of.size() != query_embs.rows) throw std::invalid_argument("recall_at_k: gold/query size mismatch");

    std::size_t hits = 0;
    for (std::size_t q = 0; q < query_embs.rows; ++q) {
        const int gold_anchor = gold.anchor_of[q];
        const double gold_sim = cosine(query_embs.row(q), anchor_embs.row(static_cast<std::size_t>(gold_anchor)),
                                       query_embs.cols);
        // rank of the gold anchor = number of anchors strictly better, where
        // equal similarity at a lower index also ranks ahead
        std::size_t better = 0;
        for (std::size_t a = 0; a < anchor_embs.rows; ++a) {
            if (a == static_cast<std::size_t>(gold_anchor)) continue;
            const double sim = cosine(query_embs.row(q), anchor_embs.row(a), query_embs.cols);
            if (sim > gold_sim || (sim == gold_sim && a < static_cast<std::size_t>(gold_anchor))) ++better;
        }
        if (better < static_cast<std::size_t>(k)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(query_embs.rows);
}

struct EvalReport {
    std::string task_tag;
    std::string metric;
    double value = 0.0;
    std::size_t num_examples = 0;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> mode_tags;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["task_tag"] = task_tag;
        j["metric"] = metric;
        j["value"] = value;
        j["num_examples"] = num_examples;
        j["seed"] = seed;
        j["mode_tags"] = mode_tags;
        return j;
    }
};

namespace detail {

template <typename Scalar>
Mat<Scalar> cls_embeddings(const encoder::EncoderBundle<Scalar>& enc, const std::vector<std::string>& sentences,
                           const tokenizer::Vocabulary& vocab, bool lowercase) {
    Mat<Scalar> out(sentences.size(), static_cast<std::size_t>(enc.config.hidden_dim));
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const auto tok = tokenizer::tokenize(corpus::split_words(sentences[i]), vocab, lowercase);
        const Mat<Scalar> h = encoder::forward(enc, tok.token_ids);
        std::memcpy(out.row(i), h.row(0), out.cols * sizeof(Scalar));
    }
    return out;
}

}  // namespace detail

/// Cross-lingual sentence retrieval: the teacher's CLS embeddings of the
/// source sentences anchor the space, the student's CLS embeddings of the
/// target sentences query it, and the matching pair is gold. Reports both
/// directions per k.
template <typename Scalar>
std::vector<EvalReport> eval_retrieval(const encoder::EncoderBundle<Scalar>& teacher,
                                       const encoder::EncoderBundle<Scalar>& student,
                                       const std::vector<corpus::ParallelPair>& test_pairs,
                                       const tokenizer::Vocabulary& teacher_vocab,
                                       const tokenizer::Vocabulary& student_vocab, const std::vector<int>& ks,
                                       std::uint64_t seed = 0, bool lowercase = false) {
    if (test_pairs.empty()) throw std::invalid_argument("eval_retrieval: empty test set");
    std::vector<std::string> src_texts, tgt_texts;
    for (const auto& p : test_pairs) {
        src_texts.push_back(p.source_text);
        tgt_texts.push_back(p.target_text);
    }
    const Mat<Scalar> anchors = detail::cls_embeddings(teacher, src_texts, teacher_vocab, lowercase);
    const Mat<Scalar> queries = detail::cls_embeddings(student, tgt_texts, student_vocab, lowercase);
    const RetrievalGold gold = identity_gold(test_pairs.size());

    std::vector<EvalReport> reports;
    for (const int k : ks) {
        EvalReport fwd;
        fwd.task_tag = "retrieval";
        fwd.metric = "recall@" + std::to_string(k);
        fwd.value = recall_at_k(queries, anchors, gold, k);
        fwd.num_examples = test_pairs.size();
        fwd.seed = seed;
        fwd.mode_tags["direction"] = "target_to_source";
        reports.push_back(fwd);

        EvalReport bwd = fwd;
        bwd.value = recall_at_k(anchors, queries, gold, k);
        bwd.mode_tags["direction"] = "source_to_target";
        reports.push_back(bwd);
    }
    return reports;
}

// ---------------------------------------------------------------------------
// 3-way classification stand-in with a closed-form ridge head
// ---------------------------------------------------------------------------

namespace detail {

/// Solves (A + lambda I) W = B for SPD A via Cholesky. A is n x n, B n x m.
template <typename Scalar>
Mat<double> ridge_solve(const Mat<double>& a, const Mat<double>& b, double lambda) {
    const std::size_t n = a.rows;
    Mat<double> l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a(i, j) + (i == j ? lambda : 0.0);
            for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
            if (i == j) {
                if (sum <= 0) throw std::runtime_error("ridge head: matrix not positive definite");
                l(i, i) = std::sqrt(sum);
            } else {
                l(i, j) = sum / l(j, j);
            }
        }
    }
    Mat<double> w(n, b.cols);
    for (std::size_t c = 0; c < b.cols; ++c) {
        std::vector<double> z(n);
        for (std::size_t i = 0; i < n; ++i) {
            double sum = b(i, c);
            for (std::size_t k = 0; k < i; ++k) sum -= l(i, k) * z[k];
            z[i] = sum / l(i, i);
        }
        for (std::size_t ii = n; ii > 0; --ii) {
            const std::size_t i = ii - 1;
            double sum = z[i];
            for (std::size_t k = i + 1; k < n; ++k) sum -= l(k, i) * w(k, c);
            w(i, c) = sum / l(i, i);
        }
    }
    return w;
}

}  // namespace detail

inline constexpr int kNumClasses = corpus::kNumClasses;

/// Fits a linear head on CLS embeddings by ridge regression to one-hot
/// targets. Rows of the returned head are the d features plus a bias row.
template <typename Scalar>
Mat<Scalar> fit_linear_head(const Mat<Scalar>& features, const std::vector<int>& labels, int num_classes,
                            double lambda = 1e-3) {
    if (features.rows != labels.size()) throw std::invalid_argument("fit_linear_head: feature/label count mismatch");
    std::vector<std::size_t> class_count(static_cast<std::size_t>(num_classes), 0);
    for (const int lab : labels) {
        if (lab < 0 || lab >= num_classes) throw std::invalid_argument("fit_linear_head: label out of range");
        ++class_count[static_cast<std::size_t>(lab)];
    }
    for (int c = 0; c < num_classes; ++c)
        if (class_count[static_cast<std::size_t>(c)] == 0)
            throw std::invalid_argument("fit_linear_head: class " + std::to_string(c) + " absent from training set");

    const std::size_t n = features.rows, d = features.cols;
    Mat<double> x(n, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) x(i, j) = static_cast<double>(features(i, j));
        x(i, d) = 1.0;
    }
    Mat<double> xtx;
    gemm_tn(x, x, xtx);
    Mat<double> y(n, static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < n; ++i) y(i, static_cast<std::size_t>(labels[i])) = 1.0;
    Mat<double> xty;
    gemm_tn(x, y, xty);
    const Mat<double> w = detail::ridge_solve<double>(xtx, xty, lambda);
    Mat<Scalar> head(w.rows, w.cols);
    for (std::size_t i = 0; i < w.size(); ++i) head.data[i] = static_cast<Scalar>(w.data[i]);
    return head;
}

template <typename Scalar>
int predict_class(const Mat<Scalar>& head, const Scalar* feature, std::size_t d) {
    if (head.rows != d + 1) throw std::invalid_argument("predict_class: head dimension mismatch");
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < head.cols; ++c) {
        double score = static_cast<double>(head(d, c));
        for (std::size_t j = 0; j < d; ++j) score += static_cast<double>(head(j, c)) * static_cast<double>(feature[j]);
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(c);
        }
    }
    return best;
}

struct LabeledSentence {
    std::string text;
    int label = 0;
};

/// Trains the head on the teacher's CLS embeddings of labeled source-language
/// sentences, then reports accuracy of the swapped-in encoder on labeled
/// target-language sentences.
template <typename Scalar>
EvalReport eval_classification(const encoder::EncoderBundle<Scalar>& teacher,
                               const encoder::EncoderBundle<Scalar>& eval_encoder,
                               const std::vector<LabeledSentence>& train_l1,
                               const std::vector<LabeledSentence>& test_l2,
                               const tokenizer::Vocabulary& teacher_vocab, const tokenizer::Vocabulary& eval_vocab,
                               int num_classes = kNumClasses, std::uint64_t seed = 0, bool lowercase = false) {
    if (train_l1.empty() || test_l2.empty()) throw std::invalid_argument("eval_classification: empty data");
    std::vector<std::string> train_texts;
    std::vector<int> train_labels;
    for (const auto& s : train_l1) {
        train_texts.push_back(s.text);
        train_labels.push_back(s.label);
    }
    const Mat<Scalar> train_feats = detail::cls_embeddings(teacher, train_texts, teacher_vocab, lowercase);
    const Mat<Scalar> head = fit_linear_head(train_feats, train_labels, num_classes);

    DownstreamModel<Scalar> model;
    model.text_encoder = teacher;
    model.head = head;
    model.task_tag = "classification";
    model = swap_text_encoder(std::move(model), eval_encoder);

    std::vector<std::string> test_texts;
    for (const auto& s : test_l2) test_texts.push_back(s.text);
    const Mat<Scalar> test_feats = detail::cls_embeddings(model.text_encoder, test_texts, eval_vocab, lowercase);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_l2.size(); ++i)
        if (predict_class(model.head, test_feats.row(i), test_feats.cols) == test_l2[i].label) ++correct;

    EvalReport report;
    report.task_tag = "classification";
    report.metric = "accuracy";
    report.value = static_cast<double>(correct) / static_cast<double>(test_l2.size());
    report.num_examples = test_l2.size();
    report.seed = seed;
    return report;
}

// ---------------------------------------------------------------------------
// In-domain corpus filter
// ---------------------------------------------------------------------------

/// Sentence vector = mean of the final-layer states at word positions (the
/// CLS slot and other non-word rows are excluded).
template <typename Scalar>
std::vector<Scalar> sentence_vector(const encoder::EncoderBundle<Scalar>& enc, const std::string& text,
                                    const tokenizer::Vocabulary& vocab, bool lowercase = false) {
    const auto tok = tokenizer::tokenize(corpus::split_words(text), vocab, lowercase);
    const Mat<Scalar> h = encoder::forward(enc, tok.token_ids);
    std::vector<Scalar> out(h.cols, Scalar(0));
    std::size_t count = 0;
    for (const auto& [start, end] : tok.word_spans)
        for (int r = start; r < end; ++r) {
            const Scalar* row = h.row(static_cast<std::size_t>(r));
            for (std::size_t j = 0; j < h.cols; ++j) out[j] += row[j];
            ++count;
        }
    if (count == 0) throw std::invalid_argument("sentence_vector: sentence has no word tokens");
    for (auto& v : out) v /= static_cast<Scalar>(count);
    return out;
}

/// Keeps candidates whose sentence embedding has cosine similarity strictly
/// above the threshold to at least one task sentence.
template <typename Scalar>
std::vector<corpus::ParallelPair> in_domain_filter(const std::vector<corpus::ParallelPair>& candidates,
                                                   const std::vector<std::string>& task_sentences,
                                                   const encoder::EncoderBundle<Scalar>& enc,
                                                   const tokenizer::Vocabulary& vocab, double threshold = 0.5,
                                                   bool lowercase = false) {
    if (task_sentences.empty()) throw std::invalid_argument("in_domain_filter: empty task sentence list");
    std::vector<std::vector<Scalar>> task_vecs;
    for (const auto& s : task_sentences) task_vecs.push_back(sentence_vector(enc, s, vocab, lowercase));

    std::vector<corpus::ParallelPair> kept;
    for (const auto& cand : candidates) {
        const std::vector<Scalar> v = sentence_vector(enc, cand.source_text, vocab, lowercase);
        double best = -1.0;
        for (const auto& t : task_vecs) best = std::max(best, cosine(v.data(), t.data(), v.size()));
        if (best > threshold) kept.push_back(cand);
    }
    return kept;
}

inline nlohmann::json reports_to_json(const std::vector<EvalReport>& reports) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(r.to_json());
    return j;
}

}  // namespace clicotea::zeroshot
