#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clicotea/aligntrain.hpp"
#include "clicotea/common.hpp"
#include "clicotea/config.hpp"
#include "clicotea/corpus.hpp"
#include "clicotea/encoder.hpp"
#include "clicotea/tokenizer.hpp"
#include "clicotea/wordalign.hpp"
#include "clicotea/zeroshot.hpp"

namespace clicotea::pipeline {

using Scalar = float;
namespace fs = std::filesystem;

/// Attached to every evaluation output so nobody mistakes desk-scale numbers
/// for the published full-scale results.
inline constexpr const char* kProvenanceNote =
    "Desk-scale synthetic stand-in. Published zero-shot results for the full-scale system "
    "(XVNLI 78.15, MaRVL 68.09, IR 67.45, TR 65.07) depend on large pretrained vision-language "
    "and multilingual encoders plus external benchmark data, none of which are used here; "
    "numbers from this harness exercise the alignment mechanics on synthetic corpora and are "
    "not comparable.";

struct PrerequisiteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StageResult {
    nlohmann::json fragment;
    bool skipped = false;
};

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"gen-corpus",    "train-teacher", "train-student-init",
                                                   "align-extract", "align-train",   "evaluate",
                                                   "report"};
    return names;
}

inline std::string producer_of(const std::string& artifact) {
    static const std::map<std::string, std::string> producers = {
        {"corpus.jsonl", "gen-corpus"},          {"teacher.vocab.json", "train-teacher"},
        {"teacher.ckpt", "train-teacher"},       {"student.vocab.json", "train-student-init"},
        {"student-init.ckpt", "train-student-init"}, {"alignments.jsonl", "align-extract"},
        {"student.ckpt", "align-train"},         {"report.json", "report"},
    };
    const auto it = producers.find(artifact);
    if (it == producers.end()) throw std::invalid_argument("unknown artifact: " + artifact);
    return it->second;
}

inline fs::path artifact_path(const config::PipelineConfig& cfg, const std::string& name) {
    return fs::path(cfg.output_dir) / name;
}

inline fs::path fragment_path(const config::PipelineConfig& cfg, const std::string& stage) {
    return fs::path(cfg.output_dir) / "fragments" / (stage + ".json");
}

/// Removes every "timings" key, recursively. Two runs of the same config are
/// expected to agree byte for byte after this.
inline nlohmann::json strip_timings(nlohmann::json j) {
    if (j.is_object()) {
        j.erase("timings");
        for (auto& [key, value] : j.items()) value = strip_timings(value);
    } else if (j.is_array()) {
        for (auto& value : j) value = strip_timings(value);
    }
    return j;
}

struct StageIo {
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

inline StageIo stage_io(const std::string& name, const config::PipelineConfig& cfg) {
    if (name == "gen-corpus") return {{}, {"corpus.jsonl"}};
    if (name == "train-teacher") return {{"corpus.jsonl"}, {"teacher.vocab.json", "teacher.ckpt"}};
    if (name == "train-student-init") return {{"corpus.jsonl"}, {"student.vocab.json", "student-init.ckpt"}};
    if (name == "align-extract") {
        StageIo io{{"corpus.jsonl"}, {"alignments.jsonl"}};
        if (!cfg.alignment.use_gold) {
            io.inputs.push_back("student.vocab.json");
            io.inputs.push_back("student-init.ckpt");
        }
        return io;
    }
    if (name == "align-train")
        return {{"corpus.jsonl", "alignments.jsonl", "teacher.vocab.json", "teacher.ckpt", "student.vocab.json",
                 "student-init.ckpt"},
                {"student.ckpt"}};
    if (name == "evaluate")
        return {{"corpus.jsonl", "teacher.vocab.json", "teacher.ckpt", "student.vocab.json", "student.ckpt"}, {}};
    throw std::invalid_argument("unknown subcommand: " + name);
}

namespace detail {

inline std::vector<corpus::ParallelPair> load_corpus_artifact(const config::PipelineConfig& cfg) {
    return corpus::load_parallel_corpus(artifact_path(cfg, "corpus.jsonl"));
}

/// Training pairs that participate in alignment extraction and training: the
/// leading alignment.max_pairs pairs of the train split.
inline std::vector<corpus::ParallelPair> alignment_subset(const std::vector<corpus::ParallelPair>& all,
                                                          int max_pairs) {
    auto train = corpus::filter_split(all, corpus::Split::train);
    if (static_cast<int>(train.size()) > max_pairs) train.resize(static_cast<std::size_t>(max_pairs));
    return train;
}

inline corpus::SyntheticLanguageConfig language_config(const config::PipelineConfig& cfg) {
    corpus::SyntheticLanguageConfig lc;
    lc.num_stems = cfg.corpus.num_stems;
    lc.markers_per_class = cfg.corpus.markers_per_class;
    lc.loanword_fraction = cfg.corpus.loanword_fraction;
    lc.seed = derive_seed(cfg.seed, "language");
    return lc;
}

inline double mean_window(const std::vector<double>& values, std::size_t begin, std::size_t end) {
    if (begin >= end || end > values.size()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += values[i];
    return sum / static_cast<double>(end - begin);
}

inline nlohmann::json curve_points(const std::vector<double>& losses, std::size_t stride) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < losses.size(); ++i)
        if (i % stride == 0 || i + 1 == losses.size()) arr.push_back({i, losses[i]});
    return arr;
}

inline std::vector<std::vector<int>> tokenize_sentences(const std::vector<std::string>& sentences,
                                                        const tokenizer::Vocabulary& vocab, int max_len,
                                                        const std::string& side) {
    std::vector<std::vector<int>> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
        auto tok = tokenizer::tokenize(corpus::split_words(s), vocab);
        if (static_cast<int>(tok.token_ids.size()) > max_len)
            throw std::runtime_error("sentence has " + std::to_string(tok.token_ids.size()) + " tokens, above " +
                                     side + ".max_len=" + std::to_string(max_len) + ": " + s);
        out.push_back(std::move(tok.token_ids));
    }
    return out;
}

inline nlohmann::json run_gen_corpus(const config::PipelineConfig& cfg) {
    std::vector<corpus::ParallelPair> pairs;
    if (!cfg.corpus.external_path.empty()) {
        pairs = corpus::load_parallel_corpus(cfg.corpus.external_path);
    } else {
        corpus::SyntheticCorpusConfig sc;
        sc.language = language_config(cfg);
        sc.num_train = cfg.corpus.train_pairs;
        sc.num_validation = cfg.corpus.validation_pairs;
        sc.num_test = cfg.corpus.test_pairs;
        sc.sentence_min_words = cfg.corpus.min_words;
        sc.sentence_max_words = cfg.corpus.max_words;
        sc.permutation_window = cfg.corpus.permutation_window;
        sc.drop_prob = cfg.corpus.drop_prob;
        sc.duplicate_prob = cfg.corpus.duplicate_prob;
        sc.substitution_prob = cfg.corpus.substitution_prob;
        sc.seed = cfg.seed;
        pairs = corpus::generate_corpus(sc);
    }
    corpus::save_parallel_corpus(artifact_path(cfg, "corpus.jsonl"), pairs);

    std::map<std::string, int> split_counts{{"train", 0}, {"validation", 0}, {"test", 0}};
    bool all_gold = true;
    std::size_t total_links = 0;
    for (const auto& p : pairs) {
        ++split_counts[corpus::to_string(p.split)];
        if (p.gold_alignment)
            total_links += p.gold_alignment->size();
        else
            all_gold = false;
    }
    nlohmann::json stats;
    stats["pairs"] = split_counts;
    stats["avg_gold_links"] = (all_gold && !pairs.empty())
                                  ? nlohmann::json(static_cast<double>(total_links) / static_cast<double>(pairs.size()))
                                  : nlohmann::json(nullptr);
    return stats;
}

inline nlohmann::json run_train_encoder(const config::PipelineConfig& cfg, encoder::Role role) {
    const bool is_teacher = role == encoder::Role::teacher;
    const config::EncoderSection& section = is_teacher ? cfg.teacher : cfg.student;
    const auto train = corpus::filter_split(load_corpus_artifact(cfg), corpus::Split::train);
    if (train.empty()) throw std::runtime_error("corpus has no train split");

    // The teacher sees only the source language; the student sees both sides.
    std::vector<std::string> sentences;
    for (const auto& p : train) sentences.push_back(p.source_text);
    if (!is_teacher)
        for (const auto& p : train) sentences.push_back(p.target_text);

    const auto vocab = tokenizer::train_vocab(sentences, section.vocab_target_size);
    vocab.save(artifact_path(cfg, is_teacher ? "teacher.vocab.json" : "student.vocab.json"));

    const std::string side = is_teacher ? "teacher" : "student";
    const auto tokenized = tokenize_sentences(sentences, vocab, section.max_len, side);

    encoder::EncoderConfig ec;
    ec.num_layers = section.num_layers;
    ec.num_heads = section.num_heads;
    ec.hidden_dim = section.hidden_dim;
    ec.ff_dim = section.ff_dim;
    ec.max_len = section.max_len;
    ec.vocab_size = vocab.size();
    // Both encoders draw their initial tensors from the same seed: shared
    // tensors start identical, standing in for the shared pretraining lineage
    // that real encoder pairs have, and the two MLM runs diverge from there.
    ec.seed = derive_seed(cfg.seed, "encoder-init");
    auto bundle = encoder::init_encoder<Scalar>(ec, role);

    encoder::MlmTrainConfig mt;
    mt.mask_rate = section.mlm_mask_rate;
    mt.steps = section.mlm_steps;
    mt.lr = section.mlm_lr;
    mt.batch_size = section.mlm_batch_size;
    mt.seed = derive_seed(cfg.seed, side + "-mlm");
    std::vector<double> losses;
    bundle = encoder::train_mlm(std::move(bundle), tokenized, mt, vocab.specials.mask, &losses);
    encoder::save_checkpoint(artifact_path(cfg, is_teacher ? "teacher.ckpt" : "student-init.ckpt"), bundle);

    const std::size_t window = std::min<std::size_t>(50, losses.size());
    nlohmann::json stats;
    stats["sentences"] = sentences.size();
    stats["vocab_size"] = vocab.size();
    stats["mlm_steps"] = losses.size();
    stats["mlm_loss_first"] = mean_window(losses, 0, window);
    stats["mlm_loss_last"] = mean_window(losses, losses.size() - window, losses.size());
    stats["mlm_loss_curve"] = curve_points(losses, 25);
    stats["params_checksum"] = to_hex(encoder::tensors_checksum(bundle));
    return stats;
}

inline nlohmann::json run_align_extract(const config::PipelineConfig& cfg) {
    const auto subset = alignment_subset(load_corpus_artifact(cfg), cfg.alignment.max_pairs);
    if (subset.empty()) throw std::runtime_error("corpus has no train split");

    std::optional<encoder::EncoderBundle<Scalar>> enc;
    std::optional<tokenizer::Vocabulary> vocab;
    if (!cfg.alignment.use_gold) {
        enc = encoder::truncate_layers(encoder::load_checkpoint<Scalar>(artifact_path(cfg, "student-init.ckpt")),
                                       cfg.alignment.extraction_layers);
        vocab = tokenizer::Vocabulary::load(artifact_path(cfg, "student.vocab.json"));
    }

    std::vector<wordalign::AlignmentRecord> records;
    records.reserve(subset.size());
    std::size_t links_before = 0, links_after = 0, bypassed_pairs = 0;
    std::size_t true_positives = 0, predicted_total = 0, reference_total = 0;
    bool all_reference = true;

    for (const auto& pair : subset) {
        wordalign::AlignmentSet set;
        if (cfg.alignment.use_gold) {
            if (!pair.gold_alignment)
                throw std::runtime_error("pair " + std::to_string(pair.id) +
                                         " has no reference alignment; alignment.use_gold needs one");
            set.links = *pair.gold_alignment;
            std::sort(set.links.begin(), set.links.end());
            set.links.erase(std::unique(set.links.begin(), set.links.end()), set.links.end());
            set.src_word_count = static_cast<int>(corpus::split_words(pair.source_text).size());
            set.tgt_word_count = static_cast<int>(corpus::split_words(pair.target_text).size());
        } else {
            const auto src_tok = tokenizer::tokenize(corpus::split_words(pair.source_text), *vocab);
            const auto tgt_tok = tokenizer::tokenize(corpus::split_words(pair.target_text), *vocab);
            for (const auto* tok : {&src_tok, &tgt_tok})
                if (static_cast<int>(tok->token_ids.size()) > enc->config.max_len)
                    throw std::runtime_error("pair " + std::to_string(pair.id) + " exceeds student.max_len");
            const auto src_h = encoder::forward(*enc, src_tok.token_ids);
            const auto tgt_h = encoder::forward(*enc, tgt_tok.token_ids);
            set = wordalign::extract_alignments(src_h, src_tok.word_spans, tgt_h, tgt_tok.word_spans,
                                                cfg.alignment.tau);
        }
        links_before += set.links.size();

        wordalign::AlignmentRecord rec;
        rec.pair_id = pair.id;
        if (cfg.alignment.filter_bypass) {
            rec.links = set.links;
        } else {
            auto [kept, bypassed] = wordalign::filter_with_guard(set, cfg.alignment.retention_min_fraction);
            rec.links = std::move(kept.links);
            rec.filtered = !bypassed;
            rec.bypassed = bypassed;
            if (bypassed) ++bypassed_pairs;
        }
        links_after += rec.links.size();

        if (pair.gold_alignment) {
            std::set<wordalign::Link> reference(pair.gold_alignment->begin(), pair.gold_alignment->end());
            for (const auto& link : rec.links) true_positives += reference.count(link);
            predicted_total += rec.links.size();
            reference_total += reference.size();
        } else {
            all_reference = false;
        }
        records.push_back(std::move(rec));
    }
    wordalign::save_alignments(artifact_path(cfg, "alignments.jsonl"), records);

    nlohmann::json stats;
    stats["pairs"] = subset.size();
    stats["links_before_filter"] = links_before;
    stats["links_after_filter"] = links_after;
    stats["bypassed_pairs"] = bypassed_pairs;
    if (all_reference && predicted_total + reference_total > 0) {
        const double p = predicted_total ? static_cast<double>(true_positives) / static_cast<double>(predicted_total) : 0.0;
        const double r = reference_total ? static_cast<double>(true_positives) / static_cast<double>(reference_total) : 0.0;
        const double f1 = (p + r > 0) ? 2 * p * r / (p + r) : 0.0;
        stats["vs_reference"] = {{"precision", p}, {"recall", r}, {"f1", f1}};
    } else {
        stats["vs_reference"] = nullptr;
    }
    return stats;
}

inline nlohmann::json run_align_train(const config::PipelineConfig& cfg) {
    const auto subset = alignment_subset(load_corpus_artifact(cfg), cfg.alignment.max_pairs);
    const auto records = wordalign::load_alignments(artifact_path(cfg, "alignments.jsonl"));
    std::map<std::int64_t, std::vector<wordalign::Link>> link_map;
    for (const auto& rec : records) link_map[rec.pair_id] = rec.links;

    const auto teacher = encoder::load_checkpoint<Scalar>(artifact_path(cfg, "teacher.ckpt"));
    const auto teacher_vocab = tokenizer::Vocabulary::load(artifact_path(cfg, "teacher.vocab.json"));
    auto student = encoder::truncate_layers(encoder::load_checkpoint<Scalar>(artifact_path(cfg, "student-init.ckpt")),
                                            cfg.alignment.encoder_layers);
    const auto student_vocab = tokenizer::Vocabulary::load(artifact_path(cfg, "student.vocab.json"));

    const auto pooling = wordalign::pooling_from_string(cfg.alignment.pooling);
    auto specs = aligntrain::build_training_pairs(subset, link_map, pooling);
    const std::size_t specs_base = specs.size();
    if (cfg.training.augment_with_source)
        specs = aligntrain::augment_with_source(specs, subset, cfg.training.augment_ratio);

    aligntrain::AlignTrainConfig at;
    at.lr = cfg.training.lr;
    at.batch_size = cfg.training.batch_size;
    at.epochs = cfg.training.epochs;
    at.augment_with_source = cfg.training.augment_with_source;
    at.augment_ratio = cfg.training.augment_ratio;
    at.seed = derive_seed(cfg.seed, "align");

    const std::uint64_t teacher_sum = encoder::tensors_checksum(teacher);
    auto [trained, curve] =
        aligntrain::train_alignment(std::move(student), teacher, specs, subset, teacher_vocab, student_vocab, at);
    if (encoder::tensors_checksum(teacher) != teacher_sum)
        throw std::logic_error("teacher parameters changed during alignment training");
    encoder::save_checkpoint(artifact_path(cfg, "student.ckpt"), trained);

    nlohmann::json stats;
    stats["pairs"] = subset.size();
    stats["specs_base"] = specs_base;
    stats["specs_trained"] = specs.size();
    stats["epoch_losses"] = aligntrain::curve_to_json(curve);
    if (!curve.empty()) {
        stats["first_epoch_loss"] = curve.front().mean_loss;
        stats["last_epoch_loss"] = curve.back().mean_loss;
        stats["loss_ratio"] = curve.front().mean_loss > 0 ? curve.back().mean_loss / curve.front().mean_loss : 0.0;
    }
    stats["teacher_checksum"] = to_hex(teacher_sum);
    stats["student_checksum"] = to_hex(encoder::tensors_checksum(trained));
    return stats;
}

inline nlohmann::json run_evaluate(const config::PipelineConfig& cfg) {
    const auto all = load_corpus_artifact(cfg);
    const auto test = corpus::filter_split(all, corpus::Split::test);
    if (test.empty()) throw std::runtime_error("corpus has no test split");

    const auto teacher = encoder::load_checkpoint<Scalar>(artifact_path(cfg, "teacher.ckpt"));
    const auto teacher_vocab = tokenizer::Vocabulary::load(artifact_path(cfg, "teacher.vocab.json"));
    const auto student = encoder::load_checkpoint<Scalar>(artifact_path(cfg, "student.ckpt"));
    const auto student_vocab = tokenizer::Vocabulary::load(artifact_path(cfg, "student.vocab.json"));

    std::vector<zeroshot::EvalReport> reports;
    nlohmann::json notes = nlohmann::json::array();
    for (const auto& task : cfg.eval.tasks) {
        if (task == "retrieval") {
            const auto r = zeroshot::eval_retrieval(teacher, student, test, teacher_vocab, student_vocab,
                                                    cfg.eval.recall_ks, cfg.seed);
            reports.insert(reports.end(), r.begin(), r.end());
            continue;
        }
        // classification: labels come from the generated language's marker
        // words, so an external corpus has no label source.
        if (!cfg.corpus.external_path.empty()) {
            notes.push_back("classification skipped: external corpora carry no class labels");
            continue;
        }
        const auto lang = corpus::build_language(language_config(cfg));
        auto train = corpus::filter_split(all, corpus::Split::train);
        if (static_cast<int>(train.size()) > cfg.eval.classification_train)
            train.resize(static_cast<std::size_t>(cfg.eval.classification_train));
        std::vector<zeroshot::LabeledSentence> train_l1, test_l1, test_l2;
        for (const auto& p : train)
            train_l1.push_back({p.source_text, lang.label_of(corpus::split_words(p.source_text))});
        for (const auto& p : test) {
            const int label = lang.label_of(corpus::split_words(p.source_text));
            test_l1.push_back({p.source_text, label});
            test_l2.push_back({p.target_text, label});
        }
        auto student_report = zeroshot::eval_classification(teacher, student, train_l1, test_l2, teacher_vocab,
                                                            student_vocab, zeroshot::kNumClasses, cfg.seed);
        student_report.mode_tags["encoder"] = "student";
        student_report.mode_tags["language"] = "target";
        reports.push_back(std::move(student_report));

        auto teacher_report = zeroshot::eval_classification(teacher, teacher, train_l1, test_l1, teacher_vocab,
                                                            teacher_vocab, zeroshot::kNumClasses, cfg.seed);
        teacher_report.mode_tags["encoder"] = "teacher";
        teacher_report.mode_tags["language"] = "source";
        reports.push_back(std::move(teacher_report));
    }

    nlohmann::json stats;
    stats["reports"] = zeroshot::reports_to_json(reports);
    stats["notes"] = notes;
    stats["provenance"] = kProvenanceNote;
    return stats;
}

}  // namespace detail

inline StageResult run_report(const config::PipelineConfig& cfg) {
    nlohmann::json stages;
    for (const auto& name : subcommands()) {
        if (name == "report") continue;
        const fs::path fp = fragment_path(cfg, name);
        if (!fs::exists(fp))
            throw PrerequisiteError("missing artifact fragments/" + name + ".json (produced by `clicotea " + name +
                                    "`)");
        stages[name] = nlohmann::json::parse(read_text_file(fp));
    }
    nlohmann::json report;
    report["config"] = config::config_to_json(cfg);
    report["provenance"] = kProvenanceNote;
    report["stages"] = std::move(stages);
    atomic_write_file(artifact_path(cfg, "report.json"), report.dump(2) + "\n");
    return {std::move(report), false};
}

inline StageResult run_subcommand(const std::string& name, const config::PipelineConfig& cfg, bool force = false) {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), name) == names.end())
        throw std::invalid_argument("unknown subcommand: " + name);
    fs::create_directories(fs::path(cfg.output_dir) / "fragments");
    if (name == "report") return run_report(cfg);

    const StageIo io = stage_io(name, cfg);
    for (const auto& input : io.inputs)
        if (!fs::exists(artifact_path(cfg, input)))
            throw PrerequisiteError("missing artifact " + input + " (produced by `clicotea " + producer_of(input) +
                                    "`)");

    nlohmann::json inputs_json = nlohmann::json::object();
    for (const auto& input : io.inputs) inputs_json[input] = to_hex(file_checksum(artifact_path(cfg, input)));
    if (name == "gen-corpus" && !cfg.corpus.external_path.empty()) {
        if (!fs::exists(cfg.corpus.external_path))
            throw std::runtime_error("external corpus not found: " + cfg.corpus.external_path);
        inputs_json["external:" + cfg.corpus.external_path] = to_hex(file_checksum(cfg.corpus.external_path));
    }
    const std::string config_sum = to_hex(fnv1a64(config::config_to_json(cfg).dump()));

    const fs::path frag_file = fragment_path(cfg, name);
    if (!force && fs::exists(frag_file)) {
        try {
            const nlohmann::json prev = nlohmann::json::parse(read_text_file(frag_file));
            bool fresh = prev.at("config_checksum") == config_sum && prev.at("inputs") == inputs_json;
            for (const auto& output : io.outputs) {
                if (!fresh) break;
                const fs::path op = artifact_path(cfg, output);
                fresh = fs::exists(op) && prev.at("outputs").at(output) == to_hex(file_checksum(op));
            }
            if (fresh) return {prev, true};
        } catch (const std::exception&) {
            // malformed or incomplete fragment: fall through and rerun
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    nlohmann::json stats;
    if (name == "gen-corpus")
        stats = detail::run_gen_corpus(cfg);
    else if (name == "train-teacher")
        stats = detail::run_train_encoder(cfg, encoder::Role::teacher);
    else if (name == "train-student-init")
        stats = detail::run_train_encoder(cfg, encoder::Role::student);
    else if (name == "align-extract")
        stats = detail::run_align_extract(cfg);
    else if (name == "align-train")
        stats = detail::run_align_train(cfg);
    else
        stats = detail::run_evaluate(cfg);
    const auto wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json frag;
    frag["subcommand"] = name;
    frag["config_checksum"] = config_sum;
    frag["inputs"] = inputs_json;
    nlohmann::json outputs_json = nlohmann::json::object();
    for (const auto& output : io.outputs) outputs_json[output] = to_hex(file_checksum(artifact_path(cfg, output)));
    frag["outputs"] = outputs_json;
    frag["stats"] = std::move(stats);
    frag["timings"] = {{"wall_ms", wall_ms}};
    atomic_write_file(frag_file, frag.dump(2) + "\n");
    return {std::move(frag), false};
}

}  // namespace clicotea::pipeline
