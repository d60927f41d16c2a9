#pragma once

#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "clicotea/common.hpp"
#include "clicotea/matrix.hpp"

namespace clicotea::encoder {

struct EncoderConfig {
    int num_layers = 2;
    int num_heads = 2;
    int hidden_dim = 32;
    int ff_dim = 64;
    int max_len = 16;
    int vocab_size = 64;
    std::uint64_t seed = 0;

    void validate() const {
        if (num_layers < 1) throw std::invalid_argument("num_layers must be >= 1");
        if (num_heads < 1) throw std::invalid_argument("num_heads must be >= 1");
        if (hidden_dim < 1 || ff_dim < 1 || vocab_size < 1) throw std::invalid_argument("dims must be positive");
        if (hidden_dim % num_heads != 0) throw std::invalid_argument("hidden_dim must be divisible by num_heads");
        if (max_len < 2) throw std::invalid_argument("max_len must be >= 2");
    }

    nlohmann::json to_json() const {
        return {{"num_layers", num_layers}, {"num_heads", num_heads}, {"hidden_dim", hidden_dim},
                {"ff_dim", ff_dim},         {"max_len", max_len},     {"vocab_size", vocab_size},
                {"seed", seed}};
    }

    static EncoderConfig from_json(const nlohmann::json& j) {
        EncoderConfig c;
        c.num_layers = j.at("num_layers").get<int>();
        c.num_heads = j.at("num_heads").get<int>();
        c.hidden_dim = j.at("hidden_dim").get<int>();
        c.ff_dim = j.at("ff_dim").get<int>();
        c.max_len = j.at("max_len").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.validate();
        return c;
    }
};

enum class Role { teacher, student };

inline std::string to_string(Role r) { return r == Role::teacher ? "teacher" : "student"; }
inline Role role_from_string(const std::string& s) {
    if (s == "teacher") return Role::teacher;
    if (s == "student") return Role::student;
    throw std::invalid_argument("unknown role: " + s);
}

template <typename Scalar>
struct EncoderBundle {
    EncoderConfig config;
    std::map<std::string, Mat<Scalar>> tensors;
    Role role = Role::student;
};

/// Final-layer hidden states of one sentence; row 0 is the CLS token.
template <typename Scalar>
using ContextualEmbeddings = Mat<Scalar>;

inline std::string layer_prefix(int l) { return "layers." + std::to_string(l) + "."; }

/// Shapes of every tensor implied by a config, keyed by canonical name.
inline std::map<std::string, std::pair<std::size_t, std::size_t>> expected_tensor_shapes(const EncoderConfig& c) {
    const auto d = static_cast<std::size_t>(c.hidden_dim);
    const auto ff = static_cast<std::size_t>(c.ff_dim);
    std::map<std::string, std::pair<std::size_t, std::size_t>> shapes;
    shapes["tok_emb"] = {static_cast<std::size_t>(c.vocab_size), d};
    shapes["pos_emb"] = {static_cast<std::size_t>(c.max_len), d};
    shapes["mlm_head"] = {static_cast<std::size_t>(c.vocab_size), d};
    shapes["mlm_bias"] = {1, static_cast<std::size_t>(c.vocab_size)};
    for (int l = 0; l < c.num_layers; ++l) {
        const std::string p = layer_prefix(l);
        shapes[p + "ln1.gamma"] = {1, d};
        shapes[p + "ln1.beta"] = {1, d};
        shapes[p + "attn.wq"] = {d, d};
        shapes[p + "attn.bq"] = {1, d};
        shapes[p + "attn.wk"] = {d, d};
        shapes[p + "attn.bk"] = {1, d};
        shapes[p + "attn.wv"] = {d, d};
        shapes[p + "attn.bv"] = {1, d};
        shapes[p + "attn.wo"] = {d, d};
        shapes[p + "attn.bo"] = {1, d};
        shapes[p + "ln2.gamma"] = {1, d};
        shapes[p + "ln2.beta"] = {1, d};
        shapes[p + "ff.w1"] = {d, ff};
        shapes[p + "ff.b1"] = {1, ff};
        shapes[p + "ff.w2"] = {ff, d};
        shapes[p + "ff.b2"] = {1, d};
    }
    shapes["final_ln.gamma"] = {1, d};
    shapes["final_ln.beta"] = {1, d};
    return shapes;
}

template <typename Scalar>
EncoderBundle<Scalar> init_encoder(const EncoderConfig& config, Role role = Role::student) {
    config.validate();
    EncoderBundle<Scalar> bundle;
    bundle.config = config;
    bundle.role = role;
    // Glorot-scaled uniform for weight matrices and embeddings; layer norm
    // gains start at one, all biases at zero. Each tensor draws from its own
    // name-derived stream, so two configs that share a tensor (same name and
    // shape) under the same seed start from identical values even when the
    // configs differ elsewhere, e.g. in depth.
    for (const auto& [name, shape] : expected_tensor_shapes(config)) {
        Rng rng(derive_seed(derive_seed(config.seed, "init"), name));
        Mat<Scalar> t(shape.first, shape.second);
        const bool is_gain = name.ends_with("gamma");
        const bool is_bias = name.ends_with("beta") || name.ends_with(".bq") || name.ends_with(".bk") ||
                             name.ends_with(".bv") || name.ends_with(".bo") || name.ends_with(".b1") ||
                             name.ends_with(".b2") || name == "mlm_bias";
        if (is_gain) {
            t.fill(Scalar(1));
        } else if (is_bias) {
            t.fill(Scalar(0));
        } else {
            // The positional table starts near zero so early representations are
            // token-dominated; training grows it only as far as order matters.
            const double limit =
                name == "pos_emb" ? 0.02 : std::sqrt(6.0 / static_cast<double>(shape.first + shape.second));
            for (auto& v : t.data) v = static_cast<Scalar>(rng.uniform(-limit, limit));
        }
        bundle.tensors[name] = std::move(t);
    }
    return bundle;
}

template <typename Scalar>
std::uint64_t tensors_checksum(const EncoderBundle<Scalar>& bundle) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : bundle.tensors) {
        h = splitmix64(h ^ fnv1a64(name));
        h = splitmix64(h ^ fnv1a64(t.data.data(), t.data.size() * sizeof(Scalar)));
    }
    return h;
}

// ---------------------------------------------------------------------------
// Forward pass. Pre-norm blocks:
//   h += attn(ln1(h));  h += ff(ln2(h));  output = final_ln(h)
// The tape keeps every intermediate the backward pass needs.
// ---------------------------------------------------------------------------

namespace detail {

template <typename Scalar>
struct LnTape {
    Mat<Scalar> xhat;             // n x d
    std::vector<Scalar> invstd;   // n
};

template <typename Scalar>
struct LayerTape {
    Mat<Scalar> h_in;
    LnTape<Scalar> ln1;
    Mat<Scalar> q, k, v;                 // n x d
    std::vector<Mat<Scalar>> attn_probs; // per head, n x n
    Mat<Scalar> ctx;                     // n x d, concatenated head outputs
    Mat<Scalar> h_mid;
    LnTape<Scalar> ln2;
    Mat<Scalar> z1;   // n x ff, pre-activation
    Mat<Scalar> g;    // n x ff, gelu(z1)
};

template <typename Scalar>
struct ForwardTape {
    std::vector<int> token_ids;
    Mat<Scalar> h0;
    std::vector<LayerTape<Scalar>> layers;
    Mat<Scalar> h_last;            // input to the final layer norm
    LnTape<Scalar> final_ln;
    Mat<Scalar> out;
};

constexpr double kLnEps = 1e-5;

template <typename Scalar>
Mat<Scalar> layernorm(const Mat<Scalar>& x, const Mat<Scalar>& gamma, const Mat<Scalar>& beta, LnTape<Scalar>& tape) {
    const std::size_t n = x.rows, d = x.cols;
    Mat<Scalar> y(n, d);
    tape.xhat = Mat<Scalar>(n, d);
    tape.invstd.assign(n, Scalar(0));
    for (std::size_t i = 0; i < n; ++i) {
        const Scalar* xi = x.row(i);
        Scalar mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += xi[j];
        mean /= static_cast<Scalar>(d);
        Scalar var = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const Scalar c = xi[j] - mean;
            var += c * c;
        }
        var /= static_cast<Scalar>(d);
        const Scalar invstd = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kLnEps));
        tape.invstd[i] = invstd;
        Scalar* xh = tape.xhat.row(i);
        Scalar* yi = y.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            xh[j] = (xi[j] - mean) * invstd;
            yi[j] = gamma.data[j] * xh[j] + beta.data[j];
        }
    }
    return y;
}

/// Gradient of layernorm. Accumulates parameter grads, returns dx.
template <typename Scalar>
Mat<Scalar> layernorm_backward(const Mat<Scalar>& dy, const LnTape<Scalar>& tape, const Mat<Scalar>& gamma,
                               Mat<Scalar>& dgamma, Mat<Scalar>& dbeta) {
    const std::size_t n = dy.rows, d = dy.cols;
    Mat<Scalar> dx(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const Scalar* dyi = dy.row(i);
        const Scalar* xh = tape.xhat.row(i);
        Scalar m1 = 0, m2 = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const Scalar dxh = dyi[j] * gamma.data[j];
            m1 += dxh;
            m2 += dxh * xh[j];
            dgamma.data[j] += dyi[j] * xh[j];
            dbeta.data[j] += dyi[j];
        }
        m1 /= static_cast<Scalar>(d);
        m2 /= static_cast<Scalar>(d);
        Scalar* dxi = dx.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const Scalar dxh = dyi[j] * gamma.data[j];
            dxi[j] = tape.invstd[i] * (dxh - m1 - xh[j] * m2);
        }
    }
    return dx;
}

template <typename Scalar>
Mat<Scalar> linear(const Mat<Scalar>& x, const Mat<Scalar>& w, const Mat<Scalar>& b) {
    Mat<Scalar> y;
    gemm_nn(x, w, y);
    for (std::size_t i = 0; i < y.rows; ++i) {
        Scalar* yi = y.row(i);
        for (std::size_t j = 0; j < y.cols; ++j) yi[j] += b.data[j];
    }
    return y;
}

template <typename Scalar>
Scalar gelu(Scalar x) {
    return x * Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
    const Scalar phi_cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2)));
    const Scalar phi_pdf = std::exp(Scalar(-0.5) * x * x) * Scalar(0.3989422804014327);
    return phi_cdf + x * phi_pdf;
}

template <typename Scalar>
void softmax_rows_inplace(Mat<Scalar>& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        Scalar* r = m.row(i);
        Scalar mx = r[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
        Scalar sum = 0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) r[j] /= sum;
    }
}

template <typename Scalar>
Mat<Scalar> head_slice(const Mat<Scalar>& m, int head, std::size_t dh) {
    Mat<Scalar> out(m.rows, dh);
    for (std::size_t i = 0; i < m.rows; ++i)
        std::memcpy(out.row(i), m.row(i) + static_cast<std::size_t>(head) * dh, dh * sizeof(Scalar));
    return out;
}

template <typename Scalar>
void head_unslice_add(Mat<Scalar>& full, const Mat<Scalar>& part, int head, std::size_t dh) {
    for (std::size_t i = 0; i < full.rows; ++i) {
        Scalar* dst = full.row(i) + static_cast<std::size_t>(head) * dh;
        const Scalar* src = part.row(i);
        for (std::size_t j = 0; j < dh; ++j) dst[j] += src[j];
    }
}

template <typename Scalar>
Mat<Scalar> forward_impl(const EncoderBundle<Scalar>& bundle, const std::vector<int>& token_ids,
                         ForwardTape<Scalar>* tape) {
    const EncoderConfig& c = bundle.config;
    const std::size_t n = token_ids.size();
    if (n == 0) throw std::invalid_argument("forward: empty token sequence");
    if (n > static_cast<std::size_t>(c.max_len))
        throw std::invalid_argument("forward: sequence length " + std::to_string(n) + " exceeds max_len " +
                                    std::to_string(c.max_len));
    for (int id : token_ids)
        if (id < 0 || id >= c.vocab_size) throw std::invalid_argument("forward: token id out of range");

    const auto d = static_cast<std::size_t>(c.hidden_dim);
    const std::size_t dh = d / static_cast<std::size_t>(c.num_heads);
    const Scalar inv_sqrt_dh = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    const auto& T = bundle.tensors;

    Mat<Scalar> h(n, d);
    {
        const auto& tok = T.at("tok_emb");
        const auto& pos = T.at("pos_emb");
        for (std::size_t i = 0; i < n; ++i) {
            const Scalar* e = tok.row(static_cast<std::size_t>(token_ids[i]));
            const Scalar* p = pos.row(i);
            Scalar* hi = h.row(i);
            for (std::size_t j = 0; j < d; ++j) hi[j] = e[j] + p[j];
        }
    }
    if (tape) {
        tape->token_ids = token_ids;
        tape->h0 = h;
        tape->layers.resize(static_cast<std::size_t>(c.num_layers));
    }

    for (int l = 0; l < c.num_layers; ++l) {
        const std::string p = layer_prefix(l);
        detail::LayerTape<Scalar> local;
        detail::LayerTape<Scalar>& lt = tape ? tape->layers[static_cast<std::size_t>(l)] : local;
        lt.h_in = h;

        Mat<Scalar> x1 = layernorm(h, T.at(p + "ln1.gamma"), T.at(p + "ln1.beta"), lt.ln1);
        lt.q = linear(x1, T.at(p + "attn.wq"), T.at(p + "attn.bq"));
        lt.k = linear(x1, T.at(p + "attn.wk"), T.at(p + "attn.bk"));
        lt.v = linear(x1, T.at(p + "attn.wv"), T.at(p + "attn.bv"));

        lt.ctx = Mat<Scalar>(n, d);
        lt.attn_probs.assign(static_cast<std::size_t>(c.num_heads), Mat<Scalar>());
        for (int head = 0; head < c.num_heads; ++head) {
            Mat<Scalar> qh = head_slice(lt.q, head, dh);
            Mat<Scalar> kh = head_slice(lt.k, head, dh);
            Mat<Scalar> vh = head_slice(lt.v, head, dh);
            Mat<Scalar> scores;
            gemm_nt(qh, kh, scores);
            for (auto& s : scores.data) s *= inv_sqrt_dh;
            softmax_rows_inplace(scores);
            lt.attn_probs[static_cast<std::size_t>(head)] = scores;
            Mat<Scalar> ctx_h;
            gemm_nn(scores, vh, ctx_h);
            head_unslice_add(lt.ctx, ctx_h, head, dh);
        }

        Mat<Scalar> attn_out = linear(lt.ctx, T.at(p + "attn.wo"), T.at(p + "attn.bo"));
        for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += attn_out.data[i];
        lt.h_mid = h;

        Mat<Scalar> x2 = layernorm(h, T.at(p + "ln2.gamma"), T.at(p + "ln2.beta"), lt.ln2);
        lt.z1 = linear(x2, T.at(p + "ff.w1"), T.at(p + "ff.b1"));
        lt.g = lt.z1;
        for (auto& v : lt.g.data) v = gelu(v);
        Mat<Scalar> ff_out = linear(lt.g, T.at(p + "ff.w2"), T.at(p + "ff.b2"));
        for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += ff_out.data[i];
    }

    if (tape) tape->h_last = h;
    detail::LnTape<Scalar> fin_local;
    detail::LnTape<Scalar>& fin = tape ? tape->final_ln : fin_local;
    Mat<Scalar> out = layernorm(h, T.at("final_ln.gamma"), T.at("final_ln.beta"), fin);
    if (tape) tape->out = out;
    return out;
}

/// Backward through the encoder given d(out). Accumulates into grads.
template <typename Scalar>
void backward_impl(const EncoderBundle<Scalar>& bundle, const ForwardTape<Scalar>& tape, const Mat<Scalar>& dout,
                   std::map<std::string, Mat<Scalar>>& grads) {
    const EncoderConfig& c = bundle.config;
    const std::size_t n = tape.token_ids.size();
    const auto d = static_cast<std::size_t>(c.hidden_dim);
    const std::size_t dh = d / static_cast<std::size_t>(c.num_heads);
    const Scalar inv_sqrt_dh = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    const auto& T = bundle.tensors;

    Mat<Scalar> dhad = layernorm_backward(dout, tape.final_ln, T.at("final_ln.gamma"), grads.at("final_ln.gamma"),
                                          grads.at("final_ln.beta"));

    for (int l = c.num_layers - 1; l >= 0; --l) {
        const std::string p = layer_prefix(l);
        const detail::LayerTape<Scalar>& lt = tape.layers[static_cast<std::size_t>(l)];

        // feed-forward block: h_out = h_mid + ff(ln2(h_mid))
        Mat<Scalar> dff = dhad;  // gradient wrt ff_out
        Mat<Scalar> dG;
        gemm_nt(dff, T.at(p + "ff.w2"), dG);
        gemm_tn(lt.g, dff, grads.at(p + "ff.w2"), true);
        {
            Mat<Scalar>& db2 = grads.at(p + "ff.b2");
            for (std::size_t i = 0; i < n; ++i) {
                const Scalar* r = dff.row(i);
                for (std::size_t j = 0; j < d; ++j) db2.data[j] += r[j];
            }
        }
        Mat<Scalar> dZ1 = dG;
        for (std::size_t i = 0; i < dZ1.size(); ++i) dZ1.data[i] *= gelu_grad(lt.z1.data[i]);

        Mat<Scalar> x2(n, d);
        {
            const auto& gamma = T.at(p + "ln2.gamma");
            const auto& beta = T.at(p + "ln2.beta");
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    x2(i, j) = gamma.data[j] * lt.ln2.xhat(i, j) + beta.data[j];
        }
        Mat<Scalar> dx2;
        gemm_nt(dZ1, T.at(p + "ff.w1"), dx2);
        gemm_tn(x2, dZ1, grads.at(p + "ff.w1"), true);
        {
            Mat<Scalar>& db1 = grads.at(p + "ff.b1");
            for (std::size_t i = 0; i < n; ++i) {
                const Scalar* r = dZ1.row(i);
                for (std::size_t j = 0; j < static_cast<std::size_t>(c.ff_dim); ++j) db1.data[j] += r[j];
            }
        }
        Mat<Scalar> dh_mid =
            layernorm_backward(dx2, lt.ln2, T.at(p + "ln2.gamma"), grads.at(p + "ln2.gamma"), grads.at(p + "ln2.beta"));
        for (std::size_t i = 0; i < dh_mid.size(); ++i) dh_mid.data[i] += dhad.data[i];

        // attention block: h_mid = h_in + wo(ctx) + bo
        Mat<Scalar> dctx;
        gemm_nt(dh_mid, T.at(p + "attn.wo"), dctx);
        gemm_tn(lt.ctx, dh_mid, grads.at(p + "attn.wo"), true);
        {
            Mat<Scalar>& dbo = grads.at(p + "attn.bo");
            for (std::size_t i = 0; i < n; ++i) {
                const Scalar* r = dh_mid.row(i);
                for (std::size_t j = 0; j < d; ++j) dbo.data[j] += r[j];
            }
        }

        Mat<Scalar> dq(n, d), dk(n, d), dv(n, d);
        for (int head = 0; head < c.num_heads; ++head) {
            const Mat<Scalar>& A = lt.attn_probs[static_cast<std::size_t>(head)];
            Mat<Scalar> dctx_h = head_slice(dctx, head, dh);
            Mat<Scalar> vh = head_slice(lt.v, head, dh);
            Mat<Scalar> qh = head_slice(lt.q, head, dh);
            Mat<Scalar> kh = head_slice(lt.k, head, dh);

            Mat<Scalar> dA;
            gemm_nt(dctx_h, vh, dA);
            Mat<Scalar> dvh;
            gemm_tn(A, dctx_h, dvh);

            // softmax backward per row
            Mat<Scalar> dS(n, n);
            for (std::size_t i = 0; i < n; ++i) {
                const Scalar* ai = A.row(i);
                const Scalar* dai = dA.row(i);
                Scalar dotv = 0;
                for (std::size_t j = 0; j < n; ++j) dotv += ai[j] * dai[j];
                Scalar* dsi = dS.row(i);
                for (std::size_t j = 0; j < n; ++j) dsi[j] = ai[j] * (dai[j] - dotv) * inv_sqrt_dh;
            }

            Mat<Scalar> dqh, dkh;
            gemm_nn(dS, kh, dqh);
            gemm_tn(dS, qh, dkh);
            head_unslice_add(dq, dqh, head, dh);
            head_unslice_add(dk, dkh, head, dh);
            head_unslice_add(dv, dvh, head, dh);
        }

        Mat<Scalar> x1(n, d);
        {
            const auto& gamma = T.at(p + "ln1.gamma");
            const auto& beta = T.at(p + "ln1.beta");
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    x1(i, j) = gamma.data[j] * lt.ln1.xhat(i, j) + beta.data[j];
        }
        Mat<Scalar> dx1;
        gemm_nt(dq, T.at(p + "attn.wq"), dx1);
        gemm_nt(dk, T.at(p + "attn.wk"), dx1, true);
        gemm_nt(dv, T.at(p + "attn.wv"), dx1, true);
        gemm_tn(x1, dq, grads.at(p + "attn.wq"), true);
        gemm_tn(x1, dk, grads.at(p + "attn.wk"), true);
        gemm_tn(x1, dv, grads.at(p + "attn.wv"), true);
        {
            Mat<Scalar>& dbq = grads.at(p + "attn.bq");
            Mat<Scalar>& dbk = grads.at(p + "attn.bk");
            Mat<Scalar>& dbv = grads.at(p + "attn.bv");
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    dbq.data[j] += dq(i, j);
                    dbk.data[j] += dk(i, j);
                    dbv.data[j] += dv(i, j);
                }
            }
        }
        Mat<Scalar> dh_in =
            layernorm_backward(dx1, lt.ln1, T.at(p + "ln1.gamma"), grads.at(p + "ln1.gamma"), grads.at(p + "ln1.beta"));
        for (std::size_t i = 0; i < dh_in.size(); ++i) dh_in.data[i] += dh_mid.data[i];
        dhad = std::move(dh_in);
    }

    Mat<Scalar>& dtok = grads.at("tok_emb");
    Mat<Scalar>& dpos = grads.at("pos_emb");
    for (std::size_t i = 0; i < n; ++i) {
        const Scalar* r = dhad.row(i);
        Scalar* te = dtok.row(static_cast<std::size_t>(tape.token_ids[i]));
        Scalar* pe = dpos.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            te[j] += r[j];
            pe[j] += r[j];
        }
    }
}

}  // namespace detail

template <typename Scalar>
ContextualEmbeddings<Scalar> forward(const EncoderBundle<Scalar>& bundle, const std::vector<int>& token_ids) {
    return detail::forward_impl<Scalar>(bundle, token_ids, nullptr);
}

// ---------------------------------------------------------------------------
// Loss specifications
// ---------------------------------------------------------------------------

/// Masked-token prediction example: input ids with MASK already substituted,
/// plus (position, original id) targets.
struct MlmExample {
    std::vector<int> input_ids;
    std::vector<std::pair<int, int>> targets;
};

/// Squared-error match of pooled output rows against fixed target vectors.
/// Each target is sum_r w_r * H[r] compared against y.
template <typename Scalar>
struct EmbedMatchItem {
    std::vector<int> token_ids;
    struct Target {
        std::vector<std::pair<int, Scalar>> row_weights;
        std::vector<Scalar> y;
    };
    std::vector<Target> targets;
};

enum class LossKind { masked_token_ce, embed_match_sq };

template <typename Scalar>
struct LossBatch {
    LossKind kind = LossKind::masked_token_ce;
    std::vector<MlmExample> mlm;
    std::vector<EmbedMatchItem<Scalar>> embed;
};

/// Computes the batch loss and the gradient of every trainable tensor.
/// Masked-token cross-entropy is averaged over masked positions; the
/// embedding-match loss is the plain sum of squared distances. Names in
/// `frozen` are omitted from the returned map.
template <typename Scalar>
std::pair<Scalar, std::map<std::string, Mat<Scalar>>> loss_and_grads(const EncoderBundle<Scalar>& bundle,
                                                                     const LossBatch<Scalar>& batch,
                                                                     const std::set<std::string>& frozen = {}) {
    if (batch.kind != LossKind::masked_token_ce && batch.kind != LossKind::embed_match_sq)
        throw std::invalid_argument("unknown loss specification");
    const EncoderConfig& c = bundle.config;
    std::map<std::string, Mat<Scalar>> grads;
    for (const auto& [name, t] : bundle.tensors) grads[name] = Mat<Scalar>(t.rows, t.cols);

    Scalar loss = 0;
    const auto d = static_cast<std::size_t>(c.hidden_dim);

    if (batch.kind == LossKind::masked_token_ce) {
        std::size_t total_masked = 0;
        for (const auto& ex : batch.mlm) total_masked += ex.targets.size();
        if (total_masked > 0) {
            const Scalar inv_m = Scalar(1) / static_cast<Scalar>(total_masked);
            // The output projection is untied from the input embeddings: the
            // predicted-token distribution here is close to uniform, and a tied
            // head would drag every input embedding toward that shared geometry.
            const auto& head = bundle.tensors.at("mlm_head");
            const auto& bias = bundle.tensors.at("mlm_bias");
            for (const auto& ex : batch.mlm) {
                detail::ForwardTape<Scalar> tape;
                Mat<Scalar> out = detail::forward_impl(bundle, ex.input_ids, &tape);
                Mat<Scalar> dout(out.rows, out.cols);
                for (const auto& [pos, target_id] : ex.targets) {
                    if (pos < 0 || static_cast<std::size_t>(pos) >= out.rows)
                        throw std::invalid_argument("mlm target position out of range");
                    if (target_id < 0 || target_id >= c.vocab_size)
                        throw std::invalid_argument("mlm target id out of range");
                    // logits = h . mlm_head^T + bias
                    std::vector<Scalar> logits(static_cast<std::size_t>(c.vocab_size));
                    const Scalar* h = out.row(static_cast<std::size_t>(pos));
                    for (int vtok = 0; vtok < c.vocab_size; ++vtok)
                        logits[static_cast<std::size_t>(vtok)] =
                            dot(h, head.row(static_cast<std::size_t>(vtok)), d) + bias.data[static_cast<std::size_t>(vtok)];
                    Scalar mx = logits[0];
                    for (const Scalar lv : logits) mx = std::max(mx, lv);
                    Scalar sum = 0;
                    for (auto& lv : logits) {
                        lv = std::exp(lv - mx);
                        sum += lv;
                    }
                    const Scalar p_target = logits[static_cast<std::size_t>(target_id)] / sum;
                    loss -= std::log(p_target) * inv_m;
                    // dlogits = (softmax - onehot) / M
                    Mat<Scalar>& dhead = grads.at("mlm_head");
                    Mat<Scalar>& dbias = grads.at("mlm_bias");
                    Scalar* dh = dout.row(static_cast<std::size_t>(pos));
                    for (int vtok = 0; vtok < c.vocab_size; ++vtok) {
                        Scalar dl = logits[static_cast<std::size_t>(vtok)] / sum;
                        if (vtok == target_id) dl -= Scalar(1);
                        dl *= inv_m;
                        dbias.data[static_cast<std::size_t>(vtok)] += dl;
                        const Scalar* erow = head.row(static_cast<std::size_t>(vtok));
                        Scalar* drow = dhead.row(static_cast<std::size_t>(vtok));
                        for (std::size_t j = 0; j < d; ++j) {
                            dh[j] += dl * erow[j];
                            drow[j] += dl * h[j];
                        }
                    }
                }
                detail::backward_impl(bundle, tape, dout, grads);
            }
        }
    } else {
        for (const auto& item : batch.embed) {
            if (item.targets.empty()) continue;
            detail::ForwardTape<Scalar> tape;
            Mat<Scalar> out = detail::forward_impl(bundle, item.token_ids, &tape);
            Mat<Scalar> dout(out.rows, out.cols);
            for (const auto& target : item.targets) {
                if (target.y.size() != d) throw std::invalid_argument("embed-match target dimension mismatch");
                std::vector<Scalar> x(d, Scalar(0));
                for (const auto& [r, w] : target.row_weights) {
                    if (r < 0 || static_cast<std::size_t>(r) >= out.rows)
                        throw std::invalid_argument("embed-match row out of range");
                    const Scalar* hr = out.row(static_cast<std::size_t>(r));
                    for (std::size_t j = 0; j < d; ++j) x[j] += w * hr[j];
                }
                for (std::size_t j = 0; j < d; ++j) {
                    const Scalar diff = x[j] - target.y[j];
                    loss += diff * diff;
                }
                for (const auto& [r, w] : target.row_weights) {
                    Scalar* dr = dout.row(static_cast<std::size_t>(r));
                    for (std::size_t j = 0; j < d; ++j) dr[j] += Scalar(2) * w * (x[j] - target.y[j]);
                }
            }
            detail::backward_impl(bundle, tape, dout, grads);
        }
    }

    for (const auto& name : frozen) grads.erase(name);
    return {loss, std::move(grads)};
}

// ---------------------------------------------------------------------------
// Adam optimizer (bias-corrected).
// ---------------------------------------------------------------------------

template <typename Scalar>
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::map<std::string, Mat<Scalar>>& params, const std::map<std::string, Mat<Scalar>>& grads) {
        ++t_;
        const Scalar bc1 = Scalar(1) - static_cast<Scalar>(std::pow(beta1_, t_));
        const Scalar bc2 = Scalar(1) - static_cast<Scalar>(std::pow(beta2_, t_));
        for (const auto& [name, g] : grads) {
            auto pit = params.find(name);
            if (pit == params.end()) continue;
            Mat<Scalar>& p = pit->second;
            Mat<Scalar>& m = state_m_[name];
            Mat<Scalar>& v = state_v_[name];
            if (m.size() != g.size()) m = Mat<Scalar>(g.rows, g.cols);
            if (v.size() != g.size()) v = Mat<Scalar>(g.rows, g.cols);
            const Scalar b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
            const Scalar lr = static_cast<Scalar>(lr_), eps = static_cast<Scalar>(eps_);
            for (std::size_t i = 0; i < g.size(); ++i) {
                m.data[i] = b1 * m.data[i] + (Scalar(1) - b1) * g.data[i];
                v.data[i] = b2 * v.data[i] + (Scalar(1) - b2) * g.data[i] * g.data[i];
                const Scalar mhat = m.data[i] / bc1;
                const Scalar vhat = v.data[i] / bc2;
                p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<std::string, Mat<Scalar>> state_m_, state_v_;
};

// ---------------------------------------------------------------------------
// Masked-token pretraining
// ---------------------------------------------------------------------------

struct MlmTrainConfig {
    double mask_rate = 0.15;
    int steps = 1000;
    double lr = 1e-3;
    int batch_size = 32;
    std::uint64_t seed = 0;
};

/// Trains with masked-token cross-entropy on tokenized sentences (CLS at
/// position 0 is never masked; at least one position per sentence is).
template <typename Scalar>
EncoderBundle<Scalar> train_mlm(EncoderBundle<Scalar> bundle, const std::vector<std::vector<int>>& sentences,
                                const MlmTrainConfig& cfg, int mask_id, std::vector<double>* step_losses = nullptr) {
    if (sentences.empty()) throw std::invalid_argument("train_mlm: empty corpus");
    if (cfg.steps < 0 || cfg.batch_size < 1) throw std::invalid_argument("train_mlm: bad steps/batch_size");
    Rng rng(derive_seed(cfg.seed, "mlm"));
    Adam<Scalar> opt(cfg.lr);
    for (int step = 0; step < cfg.steps; ++step) {
        LossBatch<Scalar> batch;
        batch.kind = LossKind::masked_token_ce;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& ids = sentences[rng.next_index(sentences.size())];
            if (ids.size() < 2) continue;
            MlmExample ex;
            ex.input_ids = ids;
            for (std::size_t pos = 1; pos < ids.size(); ++pos) {
                if (rng.bernoulli(cfg.mask_rate)) {
                    ex.targets.emplace_back(static_cast<int>(pos), ids[pos]);
                    ex.input_ids[pos] = mask_id;
                }
            }
            if (ex.targets.empty()) {
                const std::size_t pos = 1 + rng.next_index(ids.size() - 1);
                ex.targets.emplace_back(static_cast<int>(pos), ids[pos]);
                ex.input_ids[pos] = mask_id;
            }
            batch.mlm.push_back(std::move(ex));
        }
        auto [loss, grads] = loss_and_grads(bundle, batch);
        opt.step(bundle.tensors, grads);
        if (step_losses) step_losses->push_back(static_cast<double>(loss));
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Layer truncation
// ---------------------------------------------------------------------------

/// Keeps the first k transformer layers; embedding tables, the output head
/// and the final layer norm carry over.
template <typename Scalar>
EncoderBundle<Scalar> truncate_layers(const EncoderBundle<Scalar>& bundle, int k) {
    if (k < 1 || k > bundle.config.num_layers)
        throw std::invalid_argument("truncate_layers: k=" + std::to_string(k) + " outside [1, " +
                                    std::to_string(bundle.config.num_layers) + "]");
    EncoderBundle<Scalar> out;
    out.config = bundle.config;
    out.config.num_layers = k;
    out.role = bundle.role;
    for (const auto& [name, shape] : expected_tensor_shapes(out.config)) {
        (void)shape;
        out.tensors[name] = bundle.tensors.at(name);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: length-prefixed JSON manifest, then a binary blob of
// row-major little-endian f32 tensor values at the manifest's offsets.
// ---------------------------------------------------------------------------

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const EncoderBundle<Scalar>& bundle) {
    nlohmann::json manifest;
    manifest["config"] = bundle.config.to_json();
    manifest["role"] = to_string(bundle.role);
    nlohmann::json tensor_list = nlohmann::json::array();
    std::string blob;
    for (const auto& [name, t] : bundle.tensors) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = {t.rows, t.cols};
        entry["dtype"] = "f32";
        entry["offset"] = blob.size();
        tensor_list.push_back(entry);
        for (const Scalar v : t.data) {
            const float f = static_cast<float>(v);
            const char* bytes = reinterpret_cast<const char*>(&f);
            blob.append(bytes, sizeof(float));
        }
    }
    manifest["tensors"] = tensor_list;
    const std::string mjson = manifest.dump();
    std::string out;
    const std::uint64_t mlen = mjson.size();
    out.append(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out += mjson;
    out += blob;
    atomic_write_file(path, out);
}

template <typename Scalar>
EncoderBundle<Scalar> load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_text_file(path);
    if (bytes.size() < sizeof(std::uint64_t)) throw std::runtime_error("checkpoint truncated: " + path.string());
    std::uint64_t mlen = 0;
    std::memcpy(&mlen, bytes.data(), sizeof(mlen));
    if (bytes.size() < sizeof(mlen) + mlen) throw std::runtime_error("checkpoint manifest truncated");
    const nlohmann::json manifest = nlohmann::json::parse(bytes.substr(sizeof(mlen), mlen));
    EncoderBundle<Scalar> bundle;
    bundle.config = EncoderConfig::from_json(manifest.at("config"));
    bundle.role = role_from_string(manifest.at("role").get<std::string>());
    const auto expected = expected_tensor_shapes(bundle.config);
    const char* blob = bytes.data() + sizeof(mlen) + mlen;
    const std::size_t blob_size = bytes.size() - sizeof(mlen) - mlen;
    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto it = expected.find(name);
        if (it == expected.end()) throw std::runtime_error("checkpoint has unexpected tensor: " + name);
        const std::size_t r = entry.at("shape")[0].get<std::size_t>();
        const std::size_t cdim = entry.at("shape")[1].get<std::size_t>();
        if (r != it->second.first || cdim != it->second.second)
            throw std::runtime_error("checkpoint tensor shape mismatch for " + name);
        if (entry.at("dtype").get<std::string>() != "f32")
            throw std::runtime_error("unsupported checkpoint dtype for " + name);
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        const std::size_t count = r * cdim;
        if (offset + count * sizeof(float) > blob_size) throw std::runtime_error("checkpoint blob truncated");
        Mat<Scalar> t(r, cdim);
        for (std::size_t i = 0; i < count; ++i) {
            float f = 0;
            std::memcpy(&f, blob + offset + i * sizeof(float), sizeof(float));
            t.data[i] = static_cast<Scalar>(f);
        }
        bundle.tensors[name] = std::move(t);
    }
    for (const auto& [name, shape] : expected) {
        (void)shape;
        if (!bundle.tensors.count(name)) throw std::runtime_error("checkpoint missing tensor: " + name);
    }
    return bundle;
}

}  // namespace clicotea::encoder
