#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "clicotea/common.hpp"
#include "clicotea/corpus.hpp"
#include "clicotea/encoder.hpp"
#include "clicotea/tokenizer.hpp"
#include "clicotea/wordalign.hpp"

namespace clicotea::aligntrain {

constexpr int kClsWord = -1;

/// One training pair: pool the student's word (or CLS) embedding and pull it
/// toward the teacher's. `student_reads_source` marks augmentation specs
/// where the student encodes the source-language sentence itself.
struct AlignedPairSpec {
    std::int64_t pair_id = 0;
    int tgt_word = kClsWord;  // word index in the student-side sentence, or kClsWord
    int src_word = kClsWord;  // word index in the source sentence, or kClsWord
    wordalign::PoolingStrategy pooling = wordalign::PoolingStrategy::leftmost;
    bool student_reads_source = false;

    void validate() const {
        if ((tgt_word == kClsWord) != (src_word == kClsWord))
            throw std::invalid_argument("CLS spec must be CLS on both sides");
        if (tgt_word < kClsWord || src_word < kClsWord) throw std::invalid_argument("negative word index");
    }
};

template <typename Scalar>
struct EmbeddingPairBatch {
    Mat<Scalar> x;  // student-side word embeddings, one row per pair
    Mat<Scalar> y;  // teacher-side word embeddings

    void validate() const {
        if (!x.same_shape(y)) throw std::invalid_argument("embedding pair batch shape mismatch");
        if (!all_finite(x) || !all_finite(y)) throw std::invalid_argument("non-finite embedding values");
    }
};

struct AlignTrainConfig {
    double lr = 5e-5;
    int batch_size = 128;
    int epochs = 3;
    bool augment_with_source = false;
    double augment_ratio = 1.0;  // fraction of sentence pairs receiving identity specs
    std::uint64_t seed = 0;

    void validate() const {
        if (lr <= 0) throw std::invalid_argument("lr must be positive");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
        if (augment_ratio < 0 || augment_ratio > 1) throw std::invalid_argument("augment_ratio must be in [0,1]");
    }
};

/// One CLS spec per sentence pair plus one spec per alignment link, in
/// (pair order, link order). Every pair must have an alignment record.
inline std::vector<AlignedPairSpec> build_training_pairs(
    const std::vector<corpus::ParallelPair>& pairs,
    const std::map<std::int64_t, std::vector<wordalign::Link>>& alignments, wordalign::PoolingStrategy pooling) {
    std::vector<AlignedPairSpec> specs;
    for (const auto& pair : pairs) {
        const auto it = alignments.find(pair.id);
        if (it == alignments.end()) throw std::invalid_argument("no alignment for pair " + std::to_string(pair.id));
        AlignedPairSpec cls;
        cls.pair_id = pair.id;
        cls.pooling = pooling;
        specs.push_back(cls);
        for (const auto& [s, t] : it->second) {
            AlignedPairSpec spec;
            spec.pair_id = pair.id;
            spec.src_word = s;
            spec.tgt_word = t;
            spec.pooling = pooling;
            specs.push_back(spec);
        }
    }
    return specs;
}

/// Appends identity-aligned source-language specs (each word matched with
/// itself, plus CLS) for the leading `ratio` fraction of the sentence pairs
/// referenced by `specs`, in first-appearance order.
inline std::vector<AlignedPairSpec> augment_with_source(const std::vector<AlignedPairSpec>& specs,
                                                        const std::vector<corpus::ParallelPair>& pairs,
                                                        double ratio = 1.0) {
    if (ratio < 0 || ratio > 1) throw std::invalid_argument("augment ratio must be in [0,1]");
    std::vector<std::int64_t> order;
    std::set<std::int64_t> seen;
    for (const auto& spec : specs)
        if (seen.insert(spec.pair_id).second) order.push_back(spec.pair_id);
    std::map<std::int64_t, const corpus::ParallelPair*> by_id;
    for (const auto& pair : pairs) by_id[pair.id] = &pair;

    const auto take = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(order.size())));
    std::vector<AlignedPairSpec> out = specs;
    const wordalign::PoolingStrategy pooling = specs.empty() ? wordalign::PoolingStrategy::leftmost : specs[0].pooling;
    for (std::size_t i = 0; i < take; ++i) {
        const auto it = by_id.find(order[i]);
        if (it == by_id.end())
            throw std::invalid_argument("augment: pair " + std::to_string(order[i]) + " not in corpus");
        AlignedPairSpec cls;
        cls.pair_id = order[i];
        cls.pooling = pooling;
        cls.student_reads_source = true;
        out.push_back(cls);
        const auto words = corpus::split_words(it->second->source_text);
        for (std::size_t w = 0; w < words.size(); ++w) {
            AlignedPairSpec spec;
            spec.pair_id = order[i];
            spec.src_word = static_cast<int>(w);
            spec.tgt_word = static_cast<int>(w);
            spec.pooling = pooling;
            spec.student_reads_source = true;
            out.push_back(spec);
        }
    }
    return out;
}

/// Sum over pairs of squared Euclidean distance between the rows.
template <typename Scalar>
double alignment_loss(const EmbeddingPairBatch<Scalar>& batch) {
    batch.validate();
    double loss = 0;
    for (std::size_t i = 0; i < batch.x.size(); ++i) {
        const double diff = static_cast<double>(batch.x.data[i]) - static_cast<double>(batch.y.data[i]);
        loss += diff * diff;
    }
    return loss;
}

namespace detail {

/// Per-sentence-pair context shared across epochs. The teacher reads the
/// source sentence under its own vocabulary; the student reads either side
/// under the student vocabulary. The teacher is frozen and its forward is
/// pure, so caching its outputs equals per-batch recomputation.
template <typename Scalar>
struct PairContext {
    tokenizer::TokenizedText src_teacher;  // teacher vocab
    tokenizer::TokenizedText src_student;  // student vocab
    tokenizer::TokenizedText tgt_student;  // student vocab
    Mat<Scalar> teacher_src;               // teacher embeddings of the source sentence
};

template <typename Scalar>
std::vector<Scalar> teacher_target(const PairContext<Scalar>& ctx, const AlignedPairSpec& spec) {
    if (spec.src_word == kClsWord) {
        const Scalar* r = ctx.teacher_src.row(0);
        return std::vector<Scalar>(r, r + ctx.teacher_src.cols);
    }
    if (spec.src_word < 0 || static_cast<std::size_t>(spec.src_word) >= ctx.src_teacher.word_spans.size())
        throw std::invalid_argument("spec source word out of range");
    return wordalign::pool_word_embedding(ctx.src_teacher.word_spans[static_cast<std::size_t>(spec.src_word)],
                                          ctx.teacher_src, spec.pooling);
}

template <typename Scalar>
std::map<std::int64_t, PairContext<Scalar>> build_contexts(const encoder::EncoderBundle<Scalar>& teacher,
                                                           const std::vector<AlignedPairSpec>& specs,
                                                           const std::vector<corpus::ParallelPair>& pairs,
                                                           const tokenizer::Vocabulary& teacher_vocab,
                                                           const tokenizer::Vocabulary& student_vocab,
                                                           bool lowercase) {
    std::map<std::int64_t, const corpus::ParallelPair*> by_id;
    for (const auto& pair : pairs) by_id[pair.id] = &pair;
    std::map<std::int64_t, PairContext<Scalar>> contexts;
    for (const auto& spec : specs) {
        spec.validate();
        if (contexts.count(spec.pair_id)) continue;
        const auto pit = by_id.find(spec.pair_id);
        if (pit == by_id.end())
            throw std::invalid_argument("spec references unknown pair " + std::to_string(spec.pair_id));
        const auto src_words = corpus::split_words(pit->second->source_text);
        const auto tgt_words = corpus::split_words(pit->second->target_text);
        PairContext<Scalar> ctx;
        ctx.src_teacher = tokenizer::tokenize(src_words, teacher_vocab, lowercase);
        ctx.src_student = tokenizer::tokenize(src_words, student_vocab, lowercase);
        ctx.tgt_student = tokenizer::tokenize(tgt_words, student_vocab, lowercase);
        ctx.teacher_src = encoder::forward(teacher, ctx.src_teacher.token_ids);
        contexts.emplace(spec.pair_id, std::move(ctx));
    }
    return contexts;
}

template <typename Scalar>
const tokenizer::TokenizedText& student_side(const PairContext<Scalar>& ctx, const AlignedPairSpec& spec) {
    return spec.student_reads_source ? ctx.src_student : ctx.tgt_student;
}

}  // namespace detail

struct EpochLoss {
    int epoch = 0;
    double mean_loss = 0.0;
};

inline nlohmann::json curve_to_json(const std::vector<EpochLoss>& curve) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : curve) j.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}});
    return j;
}

/// Dataset loss without parameter updates, accumulated in spec order so the
/// value is independent of batching.
template <typename Scalar>
double dataset_alignment_loss(const encoder::EncoderBundle<Scalar>& student,
                              const encoder::EncoderBundle<Scalar>& teacher,
                              const std::vector<AlignedPairSpec>& specs,
                              const std::vector<corpus::ParallelPair>& pairs,
                              const tokenizer::Vocabulary& teacher_vocab, const tokenizer::Vocabulary& student_vocab,
                              bool lowercase = false) {
    if (student.config.hidden_dim != teacher.config.hidden_dim)
        throw std::invalid_argument("student/teacher dimension mismatch");
    const auto contexts = detail::build_contexts(teacher, specs, pairs, teacher_vocab, student_vocab, lowercase);
    std::map<std::pair<std::int64_t, bool>, Mat<Scalar>> student_out;

    double total = 0;
    for (const auto& spec : specs) {
        const auto& ctx = contexts.at(spec.pair_id);
        const auto& tok = detail::student_side(ctx, spec);
        const auto key = std::make_pair(spec.pair_id, spec.student_reads_source);
        auto sit = student_out.find(key);
        if (sit == student_out.end()) sit = student_out.emplace(key, encoder::forward(student, tok.token_ids)).first;
        std::vector<Scalar> x;
        if (spec.tgt_word == kClsWord) {
            const Scalar* r = sit->second.row(0);
            x.assign(r, r + sit->second.cols);
        } else {
            if (static_cast<std::size_t>(spec.tgt_word) >= tok.word_spans.size())
                throw std::invalid_argument("spec student word out of range");
            x = wordalign::pool_word_embedding(tok.word_spans[static_cast<std::size_t>(spec.tgt_word)], sit->second,
                                               spec.pooling);
        }
        const std::vector<Scalar> y = detail::teacher_target(ctx, spec);
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = static_cast<double>(x[j]) - static_cast<double>(y[j]);
            total += diff * diff;
        }
    }
    return total;
}

/// Fine-tunes the student toward the frozen teacher by mini-batch updates on
/// the summed squared-distance objective. Returns the trained student and the
/// per-epoch mean loss (total loss seen during the epoch / spec count).
template <typename Scalar>
std::pair<encoder::EncoderBundle<Scalar>, std::vector<EpochLoss>> train_alignment(
    encoder::EncoderBundle<Scalar> student, const encoder::EncoderBundle<Scalar>& teacher,
    const std::vector<AlignedPairSpec>& specs, const std::vector<corpus::ParallelPair>& pairs,
    const tokenizer::Vocabulary& teacher_vocab, const tokenizer::Vocabulary& student_vocab,
    const AlignTrainConfig& cfg, bool lowercase = false) {
    cfg.validate();
    if (specs.empty()) throw std::invalid_argument("train_alignment: empty spec list");
    if (student.config.hidden_dim != teacher.config.hidden_dim)
        throw std::invalid_argument("train_alignment: student/teacher dimension mismatch");

    const auto contexts = detail::build_contexts(teacher, specs, pairs, teacher_vocab, student_vocab, lowercase);

    encoder::Adam<Scalar> opt(cfg.lr);
    std::vector<EpochLoss> curve;
    Rng rng(derive_seed(cfg.seed, "align"));
    std::vector<std::size_t> perm(specs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the deterministic generator
        for (std::size_t i = perm.size(); i > 1; --i) {
            const std::size_t j = rng.next_index(i);
            std::swap(perm[i - 1], perm[j]);
        }
        double epoch_loss = 0;
        for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(perm.size(), start + static_cast<std::size_t>(cfg.batch_size));
            // group the batch's specs by student input sentence
            std::map<std::pair<std::int64_t, bool>, std::vector<const AlignedPairSpec*>> groups;
            for (std::size_t i = start; i < stop; ++i) {
                const auto& spec = specs[perm[i]];
                groups[{spec.pair_id, spec.student_reads_source}].push_back(&spec);
            }
            encoder::LossBatch<Scalar> batch;
            batch.kind = encoder::LossKind::embed_match_sq;
            for (const auto& [key, group] : groups) {
                const auto& ctx = contexts.at(key.first);
                const auto& tok = key.second ? ctx.src_student : ctx.tgt_student;
                encoder::EmbedMatchItem<Scalar> item;
                item.token_ids = tok.token_ids;
                for (const AlignedPairSpec* spec : group) {
                    typename encoder::EmbedMatchItem<Scalar>::Target target;
                    if (spec->tgt_word == kClsWord) {
                        target.row_weights = {{0, Scalar(1)}};
                    } else {
                        if (static_cast<std::size_t>(spec->tgt_word) >= tok.word_spans.size())
                            throw std::invalid_argument("train_alignment: spec student word out of range");
                        for (const auto& [row, w] :
                             wordalign::pooling_row_weights(tok.word_spans[static_cast<std::size_t>(spec->tgt_word)],
                                                            spec->pooling))
                            target.row_weights.emplace_back(row, static_cast<Scalar>(w));
                    }
                    target.y = detail::teacher_target(ctx, *spec);
                    item.targets.push_back(std::move(target));
                }
                batch.embed.push_back(std::move(item));
            }
            auto [loss, grads] = encoder::loss_and_grads(student, batch);
            opt.step(student.tensors, grads);
            epoch_loss += static_cast<double>(loss);
        }
        curve.push_back({epoch, epoch_loss / static_cast<double>(specs.size())});
    }
    return {std::move(student), std::move(curve)};
}

}  // namespace clicotea::aligntrain
