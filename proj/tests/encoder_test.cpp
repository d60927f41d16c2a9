#include "clicotea/encoder.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "clicotea/common.hpp"
#include "clicotea/matrix.hpp"

using namespace clicotea;
using encoder::EncoderBundle;
using encoder::EncoderConfig;
using encoder::LossBatch;
using encoder::LossKind;
using encoder::MlmExample;
using encoder::Role;

namespace {

EncoderConfig small_config() {
    EncoderConfig c;
    c.num_layers = 2;
    c.num_heads = 2;
    c.hidden_dim = 16;
    c.ff_dim = 32;
    c.max_len = 8;
    c.vocab_size = 24;
    c.seed = 7;
    return c;
}

double max_abs(const Mat<double>& m) {
    double mx = 0;
    for (double v : m.data) mx = std::max(mx, std::abs(v));
    return mx;
}

double max_row_diff(const Mat<double>& a, std::size_t ra, const Mat<double>& b, std::size_t rb) {
    double mx = 0;
    for (std::size_t j = 0; j < a.cols; ++j) mx = std::max(mx, std::abs(a(ra, j) - b(rb, j)));
    return mx;
}

template <typename Scalar>
bool tensors_equal(const EncoderBundle<Scalar>& a, const EncoderBundle<Scalar>& b) {
    if (a.tensors.size() != b.tensors.size()) return false;
    for (const auto& [name, t] : a.tensors) {
        auto it = b.tensors.find(name);
        if (it == b.tensors.end()) return false;
        if (t.rows != it->second.rows || t.cols != it->second.cols) return false;
        if (std::memcmp(t.data.data(), it->second.data.data(), t.size() * sizeof(Scalar)) != 0) return false;
    }
    return true;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("encoder_test_" + name);
}

}  // namespace

TEST(Config, ValidateRejectsBadShapes) {
    EncoderConfig c = small_config();
    c.num_heads = 3;  // 16 % 3 != 0
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_config();
    c.num_layers = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_config();
    c.max_len = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_config();
    c.hidden_dim = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    EXPECT_NO_THROW(small_config().validate());
}

TEST(Config, JsonRoundTripPreservesEveryField) {
    EncoderConfig c = small_config();
    c.seed = 0xdeadbeefULL;
    EncoderConfig back = EncoderConfig::from_json(c.to_json());
    EXPECT_EQ(back.num_layers, c.num_layers);
    EXPECT_EQ(back.num_heads, c.num_heads);
    EXPECT_EQ(back.hidden_dim, c.hidden_dim);
    EXPECT_EQ(back.ff_dim, c.ff_dim);
    EXPECT_EQ(back.max_len, c.max_len);
    EXPECT_EQ(back.vocab_size, c.vocab_size);
    EXPECT_EQ(back.seed, c.seed);
}

TEST(Shapes, MatchTheConfigExactly) {
    EncoderConfig c = small_config();
    auto shapes = encoder::expected_tensor_shapes(c);
    // 4 global tensors, 16 per layer, final layer norm pair.
    EXPECT_EQ(shapes.size(), 4u + 16u * 2u + 2u);
    EXPECT_EQ(shapes.at("tok_emb"), (std::pair<std::size_t, std::size_t>{24, 16}));
    EXPECT_EQ(shapes.at("pos_emb"), (std::pair<std::size_t, std::size_t>{8, 16}));
    EXPECT_EQ(shapes.at("mlm_head"), (std::pair<std::size_t, std::size_t>{24, 16}));
    EXPECT_EQ(shapes.at("mlm_bias"), (std::pair<std::size_t, std::size_t>{1, 24}));
    EXPECT_EQ(shapes.at("layers.1.ff.w1"), (std::pair<std::size_t, std::size_t>{16, 32}));
    EXPECT_EQ(shapes.at("layers.1.ff.w2"), (std::pair<std::size_t, std::size_t>{32, 16}));
    EXPECT_EQ(shapes.at("final_ln.gamma"), (std::pair<std::size_t, std::size_t>{1, 16}));
    EXPECT_EQ(shapes.count("layers.2.attn.wq"), 0u);
}

TEST(Init, IsDeterministicInTheSeed) {
    auto a = encoder::init_encoder<double>(small_config());
    auto b = encoder::init_encoder<double>(small_config());
    EXPECT_TRUE(tensors_equal(a, b));
    EXPECT_EQ(encoder::tensors_checksum(a), encoder::tensors_checksum(b));
    EncoderConfig other = small_config();
    other.seed = 8;
    auto c = encoder::init_encoder<double>(other);
    EXPECT_NE(encoder::tensors_checksum(a), encoder::tensors_checksum(c));
}

TEST(Init, GainsBiasesAndRangesFollowTheScheme) {
    EncoderConfig cfg = small_config();
    auto b = encoder::init_encoder<double>(cfg);
    for (double v : b.tensors.at("layers.0.ln1.gamma").data) EXPECT_EQ(v, 1.0);
    for (double v : b.tensors.at("final_ln.beta").data) EXPECT_EQ(v, 0.0);
    for (double v : b.tensors.at("layers.1.attn.bq").data) EXPECT_EQ(v, 0.0);
    for (double v : b.tensors.at("mlm_bias").data) EXPECT_EQ(v, 0.0);
    for (double v : b.tensors.at("pos_emb").data) EXPECT_LE(std::abs(v), 0.02);
    const double limit = std::sqrt(6.0 / (cfg.vocab_size + cfg.hidden_dim));
    double mx = 0;
    for (double v : b.tensors.at("tok_emb").data) mx = std::max(mx, std::abs(v));
    EXPECT_LE(mx, limit);
    EXPECT_GT(mx, 0.0);
}

TEST(Init, SharedTensorNamesAgreeAcrossDepths) {
    // A deeper model under the same seed starts from the same values wherever
    // the tensor names coincide; only the extra layers are new. This is what
    // lets a deeper variant inherit a shallower model's starting point.
    EncoderConfig c2 = small_config();
    EncoderConfig c3 = small_config();
    c3.num_layers = 3;
    auto b2 = encoder::init_encoder<double>(c2);
    auto b3 = encoder::init_encoder<double>(c3);
    for (const auto& [name, t] : b2.tensors) {
        const auto& u = b3.tensors.at(name);
        ASSERT_EQ(t.rows, u.rows);
        ASSERT_EQ(t.cols, u.cols);
        EXPECT_EQ(std::memcmp(t.data.data(), u.data.data(), t.size() * sizeof(double)), 0) << name;
    }
    EXPECT_EQ(b3.tensors.count("layers.2.attn.wq"), 1u);
}

TEST(Init, ChecksumSeesSingleValueChanges) {
    auto a = encoder::init_encoder<double>(small_config());
    auto b = a;
    EXPECT_EQ(encoder::tensors_checksum(a), encoder::tensors_checksum(b));
    b.tensors.at("layers.0.ff.w1").data[5] += 1e-9;
    EXPECT_NE(encoder::tensors_checksum(a), encoder::tensors_checksum(b));
}

TEST(Forward, ShapeAndDeterminism) {
    auto b = encoder::init_encoder<double>(small_config());
    std::vector<int> ids{0, 5, 9, 13, 2};
    auto out1 = encoder::forward(b, ids);
    auto out2 = encoder::forward(b, ids);
    EXPECT_EQ(out1.rows, ids.size());
    EXPECT_EQ(out1.cols, 16u);
    EXPECT_EQ(std::memcmp(out1.data.data(), out2.data.data(), out1.size() * sizeof(double)), 0);
}

TEST(Forward, RejectsBadSequences) {
    auto b = encoder::init_encoder<double>(small_config());
    EXPECT_THROW(encoder::forward(b, {}), std::invalid_argument);
    EXPECT_THROW(encoder::forward(b, std::vector<int>(9, 1)), std::invalid_argument);  // max_len 8
    EXPECT_THROW(encoder::forward(b, {0, -1}), std::invalid_argument);
    EXPECT_THROW(encoder::forward(b, {0, 24}), std::invalid_argument);  // vocab_size 24
}

TEST(Forward, PermutationEquivariantWithoutPositions) {
    // With the positional table zeroed the encoder has no notion of order:
    // permuting the tokens must permute the output rows and nothing else.
    EncoderConfig cfg = small_config();
    cfg.hidden_dim = 32;
    cfg.ff_dim = 48;
    cfg.vocab_size = 40;
    cfg.max_len = 10;
    cfg.seed = 11;
    auto b = encoder::init_encoder<double>(cfg);
    b.tensors.at("pos_emb").fill(0.0);
    std::vector<int> ids{3, 9, 27, 14, 5};
    std::vector<std::size_t> perm{4, 2, 0, 1, 3};
    std::vector<int> permuted(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) permuted[i] = ids[perm[i]];
    auto out = encoder::forward(b, ids);
    auto out_p = encoder::forward(b, permuted);
    for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_LT(max_row_diff(out_p, i, out, perm[i]), 1e-9);
}

TEST(Forward, PositionsMatterWithTheDefaultTable) {
    auto b = encoder::init_encoder<double>(small_config());
    auto out = encoder::forward(b, {3, 9});
    auto out_swapped = encoder::forward(b, {9, 3});
    // Token 3 sits at position 0 in one run and position 1 in the other; the
    // positional table separates the two embeddings.
    EXPECT_GT(max_row_diff(out, 0, out_swapped, 1), 1e-8);
}

TEST(Truncate, FullDepthIsTheIdentity) {
    auto b = encoder::init_encoder<double>(small_config());
    auto t = encoder::truncate_layers(b, 2);
    EXPECT_EQ(t.config.num_layers, 2);
    EXPECT_TRUE(tensors_equal(b, t));
    EXPECT_EQ(encoder::tensors_checksum(b), encoder::tensors_checksum(t));
}

TEST(Truncate, PrefixEqualsAFreshShallowInit) {
    // Per-name init streams make "init deep, keep k layers" and "init shallow"
    // indistinguishable, which pins down exactly what truncation keeps.
    EncoderConfig deep = small_config();
    EncoderConfig shallow = small_config();
    shallow.num_layers = 1;
    auto b = encoder::init_encoder<double>(deep);
    auto t = encoder::truncate_layers(b, 1);
    auto fresh = encoder::init_encoder<double>(shallow);
    EXPECT_EQ(t.config.num_layers, 1);
    EXPECT_TRUE(tensors_equal(t, fresh));
    std::vector<int> ids{1, 7, 20};
    auto out_t = encoder::forward(t, ids);
    auto out_f = encoder::forward(fresh, ids);
    EXPECT_EQ(std::memcmp(out_t.data.data(), out_f.data.data(), out_t.size() * sizeof(double)), 0);
}

TEST(Truncate, RejectsOutOfRangeDepths) {
    auto b = encoder::init_encoder<double>(small_config());
    EXPECT_THROW(encoder::truncate_layers(b, 0), std::invalid_argument);
    EXPECT_THROW(encoder::truncate_layers(b, 3), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsExactForFloatTensors) {
    auto b = encoder::init_encoder<float>(small_config(), Role::teacher);
    const auto path = temp_path("roundtrip.ckpt");
    encoder::save_checkpoint(path, b);
    auto back = encoder::load_checkpoint<float>(path);
    EXPECT_EQ(back.role, Role::teacher);
    EXPECT_EQ(back.config.num_layers, b.config.num_layers);
    EXPECT_EQ(back.config.vocab_size, b.config.vocab_size);
    EXPECT_TRUE(tensors_equal(b, back));
    EXPECT_EQ(encoder::tensors_checksum(b), encoder::tensors_checksum(back));
    std::filesystem::remove(path);
}

TEST(Checkpoint, BadFilesAreRejected) {
    EXPECT_THROW(encoder::load_checkpoint<float>(temp_path("missing.ckpt")), std::runtime_error);
    const auto path = temp_path("garbage.ckpt");
    atomic_write_file(path, "abc");
    EXPECT_THROW(encoder::load_checkpoint<float>(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(Loss, UniformLogitsScoreLogVocabRegardlessOfTargetCount) {
    // Zeroed output head and bias give uniform predictions, so the per-target
    // cross entropy is exactly log(vocab) and the average does not move with
    // the number of masked positions.
    EncoderConfig cfg = small_config();
    auto b = encoder::init_encoder<double>(cfg);
    b.tensors.at("mlm_head").fill(0.0);
    b.tensors.at("mlm_bias").fill(0.0);
    const double logv = std::log(static_cast<double>(cfg.vocab_size));

    LossBatch<double> one;
    one.kind = LossKind::masked_token_ce;
    one.mlm.push_back({{0, 5, 9, 13}, {{1, 7}}});
    auto [loss1, grads1] = encoder::loss_and_grads(b, one);
    EXPECT_NEAR(loss1, logv, 1e-9);

    LossBatch<double> many;
    many.kind = LossKind::masked_token_ce;
    many.mlm.push_back({{0, 5, 9, 13}, {{1, 7}, {2, 3}, {3, 11}}});
    many.mlm.push_back({{4, 6}, {{1, 2}}});
    auto [loss4, grads4] = encoder::loss_and_grads(b, many);
    EXPECT_NEAR(loss4, logv, 1e-9);

    // Single target: the bias gradient is softmax minus the one-hot target.
    const auto& dbias = grads1.at("mlm_bias");
    const double unif = 1.0 / cfg.vocab_size;
    double sum = 0;
    for (int v = 0; v < cfg.vocab_size; ++v) {
        const double expected = unif - (v == 7 ? 1.0 : 0.0);
        EXPECT_NEAR(dbias.data[static_cast<std::size_t>(v)], expected, 1e-12);
        sum += dbias.data[static_cast<std::size_t>(v)];
    }
    EXPECT_NEAR(sum, 0.0, 1e-12);
    // A zero head passes nothing back into the encoder stack.
    EXPECT_EQ(max_abs(grads1.at("tok_emb")), 0.0);
    EXPECT_GT(max_abs(grads1.at("mlm_head")), 0.0);
}

TEST(Loss, EmptyTargetsYieldZeroLossAndZeroGrads) {
    auto b = encoder::init_encoder<double>(small_config());
    LossBatch<double> batch;
    batch.kind = LossKind::masked_token_ce;
    batch.mlm.push_back({{0, 5, 9}, {}});
    auto [loss, grads] = encoder::loss_and_grads(b, batch);
    EXPECT_EQ(loss, 0.0);
    for (const auto& [name, g] : grads) EXPECT_EQ(max_abs(g), 0.0) << name;
}

TEST(Loss, MlmTargetsAreValidated) {
    auto b = encoder::init_encoder<double>(small_config());
    LossBatch<double> batch;
    batch.kind = LossKind::masked_token_ce;
    batch.mlm.push_back({{0, 5, 9}, {{3, 1}}});  // position 3 past the end
    EXPECT_THROW(encoder::loss_and_grads(b, batch), std::invalid_argument);
    batch.mlm[0].targets = {{1, 24}};  // id past vocab_size
    EXPECT_THROW(encoder::loss_and_grads(b, batch), std::invalid_argument);
}

TEST(Loss, EmbedMatchSumsSquaredDistances) {
    auto b = encoder::init_encoder<double>(small_config());
    std::vector<int> ids{0, 5, 9, 13};
    auto out = encoder::forward(b, ids);
    const std::size_t d = out.cols;

    encoder::EmbedMatchItem<double> item;
    item.token_ids = ids;
    // Exact row match, a row offset by 0.5 in one coordinate, and an exact
    // two-row average: only the offset contributes, so the loss is 0.25.
    encoder::EmbedMatchItem<double>::Target exact;
    exact.row_weights = {{2, 1.0}};
    exact.y.assign(out.row(2), out.row(2) + d);
    encoder::EmbedMatchItem<double>::Target offset;
    offset.row_weights = {{1, 1.0}};
    offset.y.assign(out.row(1), out.row(1) + d);
    offset.y[0] += 0.5;
    encoder::EmbedMatchItem<double>::Target mean;
    mean.row_weights = {{0, 0.5}, {3, 0.5}};
    mean.y.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) mean.y[j] = 0.5 * (out(0, j) + out(3, j));
    item.targets = {exact, offset, mean};

    LossBatch<double> batch;
    batch.kind = LossKind::embed_match_sq;
    batch.embed = {item};
    auto [loss, grads] = encoder::loss_and_grads(b, batch);
    EXPECT_NEAR(loss, 0.25, 1e-9);

    // Two copies of the item: the batch loss is a sum, not an average.
    batch.embed = {item, item};
    auto [loss2, grads2] = encoder::loss_and_grads(b, batch);
    EXPECT_NEAR(loss2, 0.5, 1e-9);

    // Every target matched exactly: zero loss and exactly zero gradients.
    item.targets = {exact};
    batch.embed = {item};
    auto [loss0, grads0] = encoder::loss_and_grads(b, batch);
    EXPECT_NEAR(loss0, 0.0, 1e-18);
    for (const auto& [name, g] : grads0) EXPECT_EQ(max_abs(g), 0.0) << name;
}

TEST(Loss, EmbedMatchValidatesRowsAndDimensions) {
    auto b = encoder::init_encoder<double>(small_config());
    encoder::EmbedMatchItem<double> item;
    item.token_ids = {0, 5};
    encoder::EmbedMatchItem<double>::Target t;
    t.row_weights = {{5, 1.0}};  // row 5 of a 2-row output
    t.y.assign(16, 0.0);
    item.targets = {t};
    LossBatch<double> batch;
    batch.kind = LossKind::embed_match_sq;
    batch.embed = {item};
    EXPECT_THROW(encoder::loss_and_grads(b, batch), std::invalid_argument);
    item.targets[0].row_weights = {{1, 1.0}};
    item.targets[0].y.assign(3, 0.0);  // hidden_dim is 16
    batch.embed = {item};
    EXPECT_THROW(encoder::loss_and_grads(b, batch), std::invalid_argument);
}

TEST(Loss, FrozenNamesAreOmittedWithoutChangingTheLoss) {
    auto b = encoder::init_encoder<double>(small_config());
    LossBatch<double> batch;
    batch.kind = LossKind::masked_token_ce;
    batch.mlm.push_back({{0, 5, 9, 13}, {{1, 7}, {3, 2}}});
    auto [loss_all, grads_all] = encoder::loss_and_grads(b, batch);
    auto [loss_frozen, grads_frozen] = encoder::loss_and_grads(b, batch, {"tok_emb", "layers.0.attn.wq"});
    EXPECT_EQ(loss_all, loss_frozen);
    EXPECT_EQ(grads_all.size(), grads_frozen.size() + 2);
    EXPECT_EQ(grads_frozen.count("tok_emb"), 0u);
    EXPECT_EQ(grads_frozen.count("layers.0.attn.wq"), 0u);
    EXPECT_EQ(grads_frozen.count("mlm_head"), 1u);
}

TEST(Optimizer, FirstStepMatchesTheBiasCorrectedFormula) {
    // After one step m-hat = g and v-hat = g^2, so the update is
    // lr * g / (|g| + eps) independent of the gradient's magnitude.
    encoder::Adam<double> opt(0.1);
    std::map<std::string, Mat<double>> params, grads;
    params["w"] = Mat<double>(1, 3);
    params["w"].data = {1.0, -2.0, 0.5};
    params["untouched"] = Mat<double>(1, 1);
    params["untouched"].data = {4.0};
    grads["w"] = Mat<double>(1, 3);
    grads["w"].data = {0.3, -0.001, 0.0};
    grads["unknown"] = Mat<double>(1, 1);
    grads["unknown"].data = {9.0};
    opt.step(params, grads);
    const double eps = 1e-8;
    EXPECT_NEAR(params["w"].data[0], 1.0 - 0.1 * 0.3 / (0.3 + eps), 1e-12);
    EXPECT_NEAR(params["w"].data[1], -2.0 + 0.1 * 0.001 / (0.001 + eps), 1e-12);
    EXPECT_NEAR(params["w"].data[2], 0.5, 1e-15);  // zero gradient, zero update
    EXPECT_EQ(params["untouched"].data[0], 4.0);
    EXPECT_EQ(params.count("unknown"), 0u);
}

TEST(Optimizer, SecondStepUsesAccumulatedMoments) {
    encoder::Adam<double> opt(0.1);
    std::map<std::string, Mat<double>> params, grads;
    params["w"] = Mat<double>(1, 1);
    params["w"].data = {0.0};
    grads["w"] = Mat<double>(1, 1);
    grads["w"].data = {1.0};
    opt.step(params, grads);
    grads["w"].data = {-1.0};
    opt.step(params, grads);
    // Tracked by hand: m2 = 0.9*0.1 - 0.1, v2 = 0.999*0.001 + 0.001, with
    // bias corrections 1-0.9^2 and 1-0.999^2.
    const double m2 = (0.9 * 0.1 + 0.1 * (-1.0)) / (1.0 - 0.81);
    const double v2 = (0.999 * 0.001 + 0.001 * 1.0) / (1.0 - 0.999 * 0.999);
    const double step1 = 0.1 * 1.0 / (1.0 + 1e-8);
    const double expected = -step1 - 0.1 * m2 / (std::sqrt(v2) + 1e-8);
    EXPECT_NEAR(params["w"].data[0], expected, 1e-12);
}

namespace {

/// Central-difference check of every analytic gradient entry in a sampled
/// subset, for one loss batch. Relative error uses max(1, |a|, |n|).
void check_gradients(EncoderBundle<double>& bundle, const LossBatch<double>& batch, double tol) {
    auto [loss, grads] = encoder::loss_and_grads(bundle, batch);
    const double h = 1e-5;
    for (auto& [name, tensor] : bundle.tensors) {
        const auto& g = grads.at(name);
        std::set<std::size_t> picks{0, tensor.size() / 2, tensor.size() - 1};
        Rng rng(derive_seed(derive_seed(0x9ec0de, name), std::uint64_t{1}));
        picks.insert(rng.next_index(tensor.size()));
        picks.insert(rng.next_index(tensor.size()));
        for (std::size_t i : picks) {
            const double saved = tensor.data[i];
            tensor.data[i] = saved + h;
            const double up = encoder::loss_and_grads(bundle, batch).first;
            tensor.data[i] = saved - h;
            const double down = encoder::loss_and_grads(bundle, batch).first;
            tensor.data[i] = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = g.data[i];
            const double rel = std::abs(analytic - numeric) /
                               std::max({1.0, std::abs(analytic), std::abs(numeric)});
            EXPECT_LE(rel, tol) << name << "[" << i << "] analytic " << analytic << " numeric " << numeric;
        }
    }
}

}  // namespace

TEST(Gradcheck, MaskedTokenLossMatchesFiniteDifferences) {
    auto bundle = encoder::init_encoder<double>(small_config());
    LossBatch<double> batch;
    batch.kind = LossKind::masked_token_ce;
    batch.mlm.push_back({{0, 5, 9, 13, 2, 17, 8}, {{1, 7}, {4, 3}}});
    batch.mlm.push_back({{4, 6, 1, 22}, {{2, 10}, {3, 0}, {1, 19}}});
    check_gradients(bundle, batch, 1e-4);
}

TEST(Gradcheck, EmbedMatchLossMatchesFiniteDifferences) {
    auto bundle = encoder::init_encoder<double>(small_config());
    EncoderConfig other = small_config();
    other.seed = 99;
    auto target_source = encoder::init_encoder<double>(other);

    LossBatch<double> batch;
    batch.kind = LossKind::embed_match_sq;
    std::vector<std::vector<int>> sentences{{0, 5, 9, 13, 2}, {4, 6, 1}};
    for (const auto& ids : sentences) {
        auto y_out = encoder::forward(target_source, ids);
        encoder::EmbedMatchItem<double> item;
        item.token_ids = ids;
        encoder::EmbedMatchItem<double>::Target cls;
        cls.row_weights = {{0, 1.0}};
        cls.y.assign(y_out.row(0), y_out.row(0) + y_out.cols);
        encoder::EmbedMatchItem<double>::Target mean;
        mean.row_weights = {{1, 0.5}, {2, 0.5}};
        mean.y.assign(y_out.cols, 0.0);
        for (std::size_t j = 0; j < y_out.cols; ++j) mean.y[j] = 0.5 * (y_out(1, j) + y_out(2, j));
        item.targets = {cls, mean};
        batch.embed.push_back(std::move(item));
    }
    check_gradients(bundle, batch, 1e-4);
}

TEST(Pretrain, ZeroStepsIsANoOp) {
    auto b = encoder::init_encoder<double>(small_config());
    const auto before = encoder::tensors_checksum(b);
    encoder::MlmTrainConfig cfg;
    cfg.steps = 0;
    auto after = encoder::train_mlm(b, {{0, 5, 9}}, cfg, 1);
    EXPECT_EQ(encoder::tensors_checksum(after), before);
}

TEST(Pretrain, SameSeedSameModel) {
    auto b = encoder::init_encoder<double>(small_config());
    encoder::MlmTrainConfig cfg;
    cfg.steps = 10;
    cfg.batch_size = 4;
    cfg.seed = 3;
    std::vector<std::vector<int>> sents{{0, 5, 9, 13}, {0, 2, 17, 8, 4}};
    auto m1 = encoder::train_mlm(b, sents, cfg, 1);
    auto m2 = encoder::train_mlm(b, sents, cfg, 1);
    EXPECT_EQ(encoder::tensors_checksum(m1), encoder::tensors_checksum(m2));
    cfg.seed = 4;
    auto m3 = encoder::train_mlm(b, sents, cfg, 1);
    EXPECT_NE(encoder::tensors_checksum(m1), encoder::tensors_checksum(m3));
}

TEST(Pretrain, TooShortSentencesLeaveTheModelUnchanged) {
    // Length-1 sentences have nothing maskable; batches stay empty, gradients
    // stay zero, and Adam moves nothing.
    auto b = encoder::init_encoder<double>(small_config());
    const auto before = encoder::tensors_checksum(b);
    encoder::MlmTrainConfig cfg;
    cfg.steps = 3;
    std::vector<double> losses;
    auto after = encoder::train_mlm(b, {{0}}, cfg, 1, &losses);
    EXPECT_EQ(encoder::tensors_checksum(after), before);
    ASSERT_EQ(losses.size(), 3u);
    for (double l : losses) EXPECT_EQ(l, 0.0);
}

TEST(Pretrain, LearnsAPositionDeterminedCorpus) {
    // One sentence whose tokens are a function of position alone is fully
    // predictable, so the masked-token loss must fall well below its starting
    // point within a few dozen steps.
    EncoderConfig cfg = small_config();
    cfg.num_layers = 1;
    cfg.vocab_size = 12;
    auto b = encoder::init_encoder<double>(cfg);
    encoder::MlmTrainConfig train;
    train.steps = 100;
    train.lr = 5e-3;
    train.batch_size = 8;
    train.mask_rate = 0.3;
    train.seed = 5;
    std::vector<double> losses;
    encoder::train_mlm(b, {{0, 5, 9, 7, 3}}, train, 1, &losses);
    ASSERT_EQ(losses.size(), 100u);
    double first = 0, last = 0;
    for (int i = 0; i < 10; ++i) {
        first += losses[static_cast<std::size_t>(i)];
        last += losses[losses.size() - 10 + static_cast<std::size_t>(i)];
    }
    EXPECT_LT(last, 0.5 * first);
}

TEST(Pretrain, RejectsBadInputs) {
    auto b = encoder::init_encoder<double>(small_config());
    encoder::MlmTrainConfig cfg;
    EXPECT_THROW(encoder::train_mlm(b, {}, cfg, 1), std::invalid_argument);
    cfg.steps = -1;
    EXPECT_THROW(encoder::train_mlm(b, {{0, 5}}, cfg, 1), std::invalid_argument);
    cfg.steps = 1;
    cfg.batch_size = 0;
    EXPECT_THROW(encoder::train_mlm(b, {{0, 5}}, cfg, 1), std::invalid_argument);
}
