#include "clicotea/corpus.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "clicotea/common.hpp"

using namespace clicotea;
using corpus::Link;
using corpus::ParallelPair;
using corpus::SyntheticTranslatorConfig;
using corpus::Words;

namespace {

SyntheticTranslatorConfig identity_config(const Words& words) {
    SyntheticTranslatorConfig cfg;
    for (const auto& w : words) cfg.lexicon[w] = w;
    return cfg;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(SplitWords, CollapsesRepeatedSpaces) {
    EXPECT_EQ(corpus::split_words("  a  bb c "), (Words{"a", "bb", "c"}));
    EXPECT_TRUE(corpus::split_words("   ").empty());
    EXPECT_EQ(corpus::join_words({"a", "bb", "c"}), "a bb c");
}

TEST(Translate, IdentityLexiconNoNoiseIsIdentity) {
    auto cfg = identity_config({"a", "b", "c"});
    const auto pair = corpus::generate_synthetic_pair({"a", "b", "c"}, cfg);
    EXPECT_EQ(pair.target_text, "a b c");
    EXPECT_EQ(*pair.gold_alignment, (std::vector<Link>{{0, 0}, {1, 1}, {2, 2}}));
}

TEST(Translate, ReversalPermutationLinksCrosswise) {
    const Words mapped{"x", "y", "z"};
    const auto [target, links] = corpus::permute_target(mapped, {2, 1, 0});
    EXPECT_EQ(target, (Words{"z", "y", "x"}));
    EXPECT_EQ(links, (std::vector<Link>{{0, 2}, {1, 1}, {2, 0}}));
}

TEST(Translate, PermuteTargetRejectsNonPermutations) {
    EXPECT_THROW(corpus::permute_target({"x", "y"}, {0}), std::invalid_argument);
    EXPECT_THROW(corpus::permute_target({"x", "y"}, {0, 0}), std::invalid_argument);
    EXPECT_THROW(corpus::permute_target({"x", "y"}, {0, 2}), std::invalid_argument);
}

TEST(Translate, ForcedDropRemovesWordAndLink) {
    std::vector<corpus::NoiseDecision> decisions(2);
    decisions[1].drop = true;
    const auto [target, links] = corpus::apply_noise({"x", "y"}, {0, 1}, decisions);
    EXPECT_EQ(target, (Words{"x"}));
    EXPECT_EQ(links, (std::vector<Link>{{0, 0}}));
}

TEST(Translate, DuplicateLinksSourceToBothCopies) {
    std::vector<corpus::NoiseDecision> decisions(2);
    decisions[0].duplicate = true;
    const auto [target, links] = corpus::apply_noise({"x", "y"}, {1, 0}, decisions);
    EXPECT_EQ(target, (Words{"x", "x", "y"}));
    // Source word 1 (placed first by the permutation) gains a link per copy.
    EXPECT_EQ(links, (std::vector<Link>{{0, 2}, {1, 0}, {1, 1}}));
}

TEST(Translate, SubstitutedWordLosesItsLink) {
    std::vector<corpus::NoiseDecision> decisions(2);
    decisions[0].substitute_with = "q";
    const auto [target, links] = corpus::apply_noise({"x", "y"}, {0, 1}, decisions);
    EXPECT_EQ(target, (Words{"q", "y"}));
    EXPECT_EQ(links, (std::vector<Link>{{1, 1}}));
}

TEST(Translate, WindowPermutationAdvancesWordsAtMostWindow) {
    Rng rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.next_index(12);
        const int window = static_cast<int>(rng.next_index(4));
        const auto perm = corpus::sample_window_permutation(n, window, rng);
        std::set<int> seen(perm.begin(), perm.end());
        ASSERT_EQ(seen.size(), n);
        for (std::size_t t = 0; t < n; ++t) {
            ASSERT_GE(perm[t], 0);
            ASSERT_LT(perm[t], static_cast<int>(n));
            // A word may be delayed arbitrarily but pulled forward at most
            // `window` positions.
            ASSERT_LE(perm[t], static_cast<int>(t) + window);
        }
    }
}

TEST(Translate, WindowZeroIsIdentity) {
    Rng rng(5);
    const auto perm = corpus::sample_window_permutation(6, 0, rng);
    EXPECT_EQ(perm, (std::vector<int>{0, 1, 2, 3, 4, 5}));
}

TEST(Translate, EmptySourceIsRejected) {
    SyntheticTranslatorConfig cfg;
    EXPECT_THROW(corpus::generate_synthetic_pair({}, cfg), std::invalid_argument);
}

TEST(Translate, UnknownWordIsRejected) {
    auto cfg = identity_config({"a"});
    EXPECT_THROW(corpus::generate_synthetic_pair({"a", "b"}, cfg), std::invalid_argument);
}

TEST(Translate, NonBijectiveLexiconIsRejected) {
    SyntheticTranslatorConfig cfg;
    cfg.lexicon = {{"a", "x"}, {"b", "x"}};
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Translate, SameSeedSamePair) {
    auto cfg = identity_config({"a", "b", "c", "d", "e"});
    cfg.permutation_window = 2;
    cfg.drop_prob = 0.2;
    cfg.duplicate_prob = 0.2;
    cfg.substitution_prob = 0.2;
    cfg.seed = 99;
    const auto first = corpus::generate_synthetic_pair({"a", "b", "c", "d", "e"}, cfg);
    const auto second = corpus::generate_synthetic_pair({"a", "b", "c", "d", "e"}, cfg);
    EXPECT_EQ(first.target_text, second.target_text);
    EXPECT_EQ(*first.gold_alignment, *second.gold_alignment);
}

TEST(CorpusIO, RoundTripPreservesEveryField) {
    std::vector<ParallelPair> pairs(2);
    pairs[0].id = 1;
    pairs[0].source_text = "a b";
    pairs[0].target_text = "b a";
    pairs[0].gold_alignment = std::vector<Link>{{0, 1}, {1, 0}};
    pairs[0].split = corpus::Split::train;
    pairs[1].id = 2;
    pairs[1].source_text = "c d";
    pairs[1].target_text = "d c";
    pairs[1].split = corpus::Split::test;  // external-style pair without gold

    const auto path = temp_file("clicotea_corpus_roundtrip.jsonl");
    corpus::save_parallel_corpus(path, pairs);
    const auto loaded = corpus::load_parallel_corpus(path);
    std::filesystem::remove(path);

    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0].id, 1);
    EXPECT_EQ(loaded[0].target_text, "b a");
    EXPECT_EQ(*loaded[0].gold_alignment, (std::vector<Link>{{0, 1}, {1, 0}}));
    EXPECT_EQ(loaded[0].split, corpus::Split::train);
    EXPECT_FALSE(loaded[1].gold_alignment.has_value());
    EXPECT_EQ(loaded[1].split, corpus::Split::test);
}

TEST(CorpusIO, EmptyFileYieldsEmptyCorpus) {
    const auto path = temp_file("clicotea_corpus_empty.jsonl");
    { std::ofstream out(path); }
    EXPECT_TRUE(corpus::load_parallel_corpus(path).empty());
    std::filesystem::remove(path);
}

TEST(CorpusIO, MissingFileIsAnError) {
    EXPECT_THROW(corpus::load_parallel_corpus(temp_file("clicotea_no_such_corpus.jsonl")), std::runtime_error);
}

TEST(CorpusIO, ErrorsNameTheOffendingLine) {
    const auto path = temp_file("clicotea_corpus_bad.jsonl");
    const std::string good = R"({"id":1,"src":"a","tgt":"a","gold":[[0,0]],"split":"train"})";

    auto expect_error_on_line_2 = [&](const std::string& second_line) {
        atomic_write_file(path, good + "\n" + second_line + "\n");
        try {
            corpus::load_parallel_corpus(path);
            FAIL() << "expected a parse error for: " << second_line;
        } catch (const std::runtime_error& e) {
            EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
        }
    };

    expect_error_on_line_2("not json");
    expect_error_on_line_2(R"({"id":2,"src":"a","tgt":"a","gold":[[0,5]],"split":"train"})");
    expect_error_on_line_2(R"({"id":1,"src":"b","tgt":"b","gold":null,"split":"train"})");
    expect_error_on_line_2(R"({"id":3,"src":"a","tgt":"a","gold":null,"split":"weird"})");
    std::filesystem::remove(path);
}

TEST(Stats, EmptyCorpusHasZeroStats) {
    const auto stats = corpus::corpus_statistics({});
    EXPECT_EQ(stats.total_sentences, 0u);
    EXPECT_EQ(stats.avg_aligned_tokens, 0.0);
}

TEST(Stats, AveragesLinkCounts) {
    std::vector<ParallelPair> pairs(2);
    pairs[0].source_text = pairs[0].target_text = "a b c";
    pairs[0].gold_alignment = std::vector<Link>{{0, 0}, {1, 1}, {2, 2}};
    pairs[1].source_text = pairs[1].target_text = "a b c d e";
    pairs[1].gold_alignment = std::vector<Link>{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}};
    const auto stats = corpus::corpus_statistics(pairs);
    EXPECT_EQ(stats.total_sentences, 2u);
    EXPECT_DOUBLE_EQ(stats.avg_aligned_tokens, 4.0);
}

TEST(Stats, MissingAlignmentIsAnError) {
    std::vector<ParallelPair> pairs(1);
    pairs[0].source_text = pairs[0].target_text = "a";
    EXPECT_THROW(corpus::corpus_statistics(pairs), std::invalid_argument);
}

TEST(Stats, CleanFixedLengthCorpusAveragesExactly) {
    // Window 0 and zero noise force one link per word; 7-word sentences only.
    corpus::SyntheticCorpusConfig cfg;
    cfg.num_train = 100;
    cfg.num_validation = 0;
    cfg.num_test = 1;
    cfg.sentence_min_words = 7;
    cfg.sentence_max_words = 7;
    cfg.permutation_window = 0;
    const auto pairs = corpus::generate_corpus(cfg);
    const auto stats = corpus::corpus_statistics(pairs);
    EXPECT_EQ(stats.total_sentences, 101u);
    EXPECT_DOUBLE_EQ(stats.avg_aligned_tokens, 7.0);
    for (const auto& p : pairs) EXPECT_EQ(corpus::split_words(p.source_text).size(), 7u);
}

TEST(Language, BuildsDistinctPrefixFreeStems) {
    corpus::SyntheticLanguageConfig cfg;
    cfg.num_stems = 60;
    cfg.loanword_fraction = 0.5;
    const auto lang = corpus::build_language(cfg);

    ASSERT_EQ(lang.stems.size(), 60u);
    std::set<std::string> prefixes;
    for (const auto& s : lang.stems) {
        ASSERT_EQ(s.size(), 4u);
        EXPECT_TRUE(prefixes.insert(s.substr(0, 3)).second) << "shared prefix in " << s;
    }
    ASSERT_EQ(lang.marker_sets.size(), 3u);
    for (const auto& set : lang.marker_sets)
        for (const auto& m : set) {
            EXPECT_EQ(m.size(), 3u);
            EXPECT_TRUE(prefixes.insert(m).second) << "marker collides with a stem prefix: " << m;
            EXPECT_EQ(lang.lexicon.at(m), m);  // markers are always loanwords
        }

    int loans = 0;
    for (const auto& s : lang.stems) loans += lang.lexicon.at(s) == s ? 1 : 0;
    EXPECT_EQ(loans, 30);
}

TEST(Language, FullLoanFractionKeepsEveryWord) {
    corpus::SyntheticLanguageConfig cfg;
    cfg.num_stems = 30;
    cfg.loanword_fraction = 1.0;
    const auto lang = corpus::build_language(cfg);
    for (const auto& [l1, l2] : lang.lexicon) EXPECT_EQ(l1, l2);
}

TEST(Language, ZeroLoanFractionTranslatesEveryStem) {
    corpus::SyntheticLanguageConfig cfg;
    cfg.num_stems = 30;
    cfg.loanword_fraction = 0.0;
    const auto lang = corpus::build_language(cfg);
    const std::set<std::string> l1(lang.stems.begin(), lang.stems.end());
    for (const auto& s : lang.stems) {
        EXPECT_NE(lang.lexicon.at(s), s);
        EXPECT_FALSE(l1.count(lang.lexicon.at(s))) << "L2 form collides with an L1 stem";
    }
}

TEST(Language, RejectsBadConfigs) {
    corpus::SyntheticLanguageConfig cfg;
    cfg.num_stems = 3;
    EXPECT_THROW(corpus::build_language(cfg), std::invalid_argument);  // below minimum
    cfg.num_stems = 7;
    EXPECT_THROW(corpus::build_language(cfg), std::invalid_argument);  // odd
    cfg.num_stems = 30;
    cfg.loanword_fraction = 1.5;
    EXPECT_THROW(corpus::build_language(cfg), std::invalid_argument);
    cfg.loanword_fraction = 0.5;
    cfg.markers_per_class = 0;
    EXPECT_THROW(corpus::build_language(cfg), std::invalid_argument);
    cfg.markers_per_class = 2;
    cfg.num_stems = 2000;  // more prefixes than half the CVC space
    EXPECT_THROW(corpus::build_language(cfg), std::invalid_argument);
}

TEST(Language, SentencesAreMarkerPlusWholeCouples) {
    corpus::SyntheticLanguageConfig cfg;
    cfg.num_stems = 40;
    const auto lang = corpus::build_language(cfg);
    std::map<std::string, std::size_t> stem_index;
    for (std::size_t i = 0; i < lang.stems.size(); ++i) stem_index[lang.stems[i]] = i;

    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const auto sentence = corpus::sample_sentence(lang, 5, 9, rng);
        ASSERT_TRUE(sentence.size() == 5 || sentence.size() == 7 || sentence.size() == 9);

        const int label = lang.label_of(sentence);  // throws unless exactly one marker class
        ASSERT_GE(label, 0);
        ASSERT_LT(label, corpus::kNumClasses);

        std::set<std::size_t> couples;
        std::map<std::size_t, int> members;
        for (const auto& w : sentence) {
            const auto it = stem_index.find(w);
            if (it == stem_index.end()) continue;  // the marker
            couples.insert(it->second / 2);
            members[it->second / 2] += 1;
        }
        ASSERT_EQ(couples.size() * 2 + 1, sentence.size());
        for (const auto& [couple, count] : members) EXPECT_EQ(count, 2) << "broken couple " << couple;
    }
}

TEST(Language, SampleSentenceRejectsImpossibleBounds) {
    const auto lang = corpus::build_language({});
    Rng rng(1);
    EXPECT_THROW(corpus::sample_sentence(lang, 1, 9, rng), std::invalid_argument);
    EXPECT_THROW(corpus::sample_sentence(lang, 9, 5, rng), std::invalid_argument);
    EXPECT_THROW(corpus::sample_sentence(lang, 2, 2, rng), std::invalid_argument);  // no room for a couple
}

TEST(Language, LabelOfRejectsMarkerlessAndMixedSentences) {
    const auto lang = corpus::build_language({});
    EXPECT_THROW(lang.label_of({lang.stems[0], lang.stems[1]}), std::runtime_error);
    EXPECT_THROW(lang.label_of({lang.marker_sets[0][0], lang.marker_sets[1][0]}), std::runtime_error);
    EXPECT_EQ(lang.label_of({lang.stems[0], lang.marker_sets[2][0], lang.stems[1]}), 2);
}

TEST(GenerateCorpus, SplitsAndDeterminism) {
    corpus::SyntheticCorpusConfig cfg;
    cfg.num_train = 30;
    cfg.num_validation = 5;
    cfg.num_test = 7;
    cfg.permutation_window = 2;
    cfg.drop_prob = 0.1;
    cfg.duplicate_prob = 0.1;
    cfg.substitution_prob = 0.1;

    const auto pairs = corpus::generate_corpus(cfg);
    ASSERT_EQ(pairs.size(), 42u);
    EXPECT_EQ(corpus::filter_split(pairs, corpus::Split::train).size(), 30u);
    EXPECT_EQ(corpus::filter_split(pairs, corpus::Split::validation).size(), 5u);
    EXPECT_EQ(corpus::filter_split(pairs, corpus::Split::test).size(), 7u);

    const auto again = corpus::generate_corpus(cfg);
    EXPECT_EQ(corpus::corpus_to_jsonl(pairs), corpus::corpus_to_jsonl(again));

    cfg.seed += 1;
    const auto shifted = corpus::generate_corpus(cfg);
    EXPECT_NE(corpus::corpus_to_jsonl(pairs), corpus::corpus_to_jsonl(shifted));
}

TEST(GenerateCorpus, GoldLinksStayInBounds) {
    corpus::SyntheticCorpusConfig cfg;
    cfg.num_train = 1000;
    cfg.num_validation = 0;
    cfg.num_test = 1;
    cfg.permutation_window = 3;
    cfg.drop_prob = 0.15;
    cfg.duplicate_prob = 0.15;
    cfg.substitution_prob = 0.15;
    cfg.language.loanword_fraction = 0.5;

    for (const auto& p : corpus::generate_corpus(cfg)) {
        const int src_n = static_cast<int>(corpus::split_words(p.source_text).size());
        const int tgt_n = static_cast<int>(corpus::split_words(p.target_text).size());
        ASSERT_TRUE(p.gold_alignment.has_value());
        for (const auto& [s, t] : *p.gold_alignment) {
            ASSERT_GE(s, 0);
            ASSERT_LT(s, src_n);
            ASSERT_GE(t, 0);
            ASSERT_LT(t, tgt_n);
        }
    }
}

TEST(GenerateCorpus, CleanWindowZeroGoldIsIdentity) {
    corpus::SyntheticCorpusConfig cfg;
    cfg.num_train = 50;
    cfg.num_validation = 0;
    cfg.num_test = 1;
    cfg.permutation_window = 0;
    for (const auto& p : corpus::generate_corpus(cfg)) {
        const auto n = corpus::split_words(p.source_text).size();
        ASSERT_EQ(p.gold_alignment->size(), n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ((*p.gold_alignment)[i], (Link{i, i}));
    }
}
