#include "ict/model.hpp"

#include <cmath>

#include "ict/errors.hpp"
#include "ict/rng.hpp"

namespace ict {

void ICTConfig::validate() const {
    if (image_h <= 0 || image_w <= 0 || grid <= 0)
        throw ContractError("config: non-positive geometry");
    if (image_h != image_w) throw ContractError("config: image must be square");
    if (image_h % grid != 0)
        throw ContractError("config: image side " + std::to_string(image_h) +
                            " not divisible by grid " + std::to_string(grid));
    if (embed_dim % heads != 0)
        throw ContractError("config: embed_dim " + std::to_string(embed_dim) +
                            " not divisible by heads " + std::to_string(heads));
    if (mlp_ratio < 1) throw ContractError("config: mlp_ratio must be >= 1");
    if (channels != 3) throw ContractError("config: only RGB images supported");
}

ICTConfig ICTConfig::desk(int n_identities) {
    ICTConfig c;
    c.image_h = c.image_w = 56;
    c.grid = 7;
    c.embed_dim = 128;
    c.depth = 4;
    c.heads = 4;
    c.n_identities = n_identities;
    return c;
}

ICTConfig ICTConfig::paper(int n_identities) {
    ICTConfig c;  // defaults are the paper preset
    c.n_identities = n_identities;
    return c;
}

namespace {

Tensor randn(Rng& rng, std::vector<int> shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (auto& v : t.values()) v = rng.normal(0.0, stddev);
    return t;
}

Tensor zeros_param(std::vector<int> shape) { return Tensor::zeros(std::move(shape), true); }

Tensor ones_param(std::vector<int> shape) { return Tensor::full(std::move(shape), 1.0, true); }

}  // namespace

ModelParams ModelParams::init(const ICTConfig& config, std::uint64_t seed) {
    config.validate();
    if (config.n_identities < 1)
        throw ContractError("init: n_identities must be >= 1, got " +
                            std::to_string(config.n_identities));
    Rng rng(derive_seed(seed, 0x1c));
    ModelParams p;
    p.config = config;
    const int d = config.embed_dim;
    constexpr double kStd = 0.02;
    p.patch_proj = randn(rng, {config.patch_dim(), d}, kStd);
    p.patch_bias = zeros_param({d});
    p.inner_token = randn(rng, {d}, kStd);
    p.outer_token = randn(rng, {d}, kStd);
    p.pos_embed = randn(rng, {config.n_tokens(), d}, kStd);
    p.blocks.resize(static_cast<std::size_t>(config.depth));
    for (auto& b : p.blocks) {
        b.ln1_gain = ones_param({d});
        b.ln1_bias = zeros_param({d});
        b.wq = randn(rng, {d, d}, kStd);
        b.bq = zeros_param({d});
        b.wk = randn(rng, {d, d}, kStd);
        b.bk = zeros_param({d});
        b.wv = randn(rng, {d, d}, kStd);
        b.bv = zeros_param({d});
        b.wo = randn(rng, {d, d}, kStd);
        b.bo = zeros_param({d});
        b.ln2_gain = ones_param({d});
        b.ln2_bias = zeros_param({d});
        b.w1 = randn(rng, {d, config.mlp_hidden()}, kStd);
        b.b1 = zeros_param({config.mlp_hidden()});
        b.w2 = randn(rng, {config.mlp_hidden(), d}, kStd);
        b.b2 = zeros_param({d});
    }
    p.final_gain = ones_param({d});
    p.final_bias = zeros_param({d});
    p.head = randn(rng, {d, config.n_identities}, kStd);
    return p;
}

std::vector<Tensor> ModelParams::all() const {
    std::vector<Tensor> out{patch_proj, patch_bias, inner_token, outer_token, pos_embed};
    for (const auto& b : blocks) {
        out.insert(out.end(), {b.ln1_gain, b.ln1_bias, b.wq, b.bq, b.wk, b.bk, b.wv, b.bv,
                               b.wo, b.bo, b.ln2_gain, b.ln2_bias, b.w1, b.b1, b.w2, b.b2});
    }
    out.insert(out.end(), {final_gain, final_bias, head});
    return out;
}

void set_params_requires_grad(ModelParams& params, bool requires_grad) {
    for (Tensor t : params.all()) t.set_requires_grad(requires_grad);
}

Tensor patch_embed(Tape& tape, const Image8& image, const ModelParams& params) {
    const ICTConfig& cfg = params.config;
    if (image.width != cfg.image_w || image.height != cfg.image_h)
        throw DimensionError("patch_embed: image " + std::to_string(image.width) + "x" +
                             std::to_string(image.height) + " does not match config " +
                             std::to_string(cfg.image_w) + "x" + std::to_string(cfg.image_h));
    const int g = cfg.grid, P = cfg.patch(), C = cfg.channels;
    const int n = cfg.n_patches(), pd = cfg.patch_dim();

    // pixels scaled to [0,1]; patches row-major over the grid; within a patch
    // row-major with channels interleaved last
    Tensor x = Tensor::zeros({n, pd});
    for (int py = 0; py < g; ++py)
        for (int px = 0; px < g; ++px) {
            const int row = py * g + px;
            for (int r = 0; r < P; ++r)
                for (int c = 0; c < P; ++c)
                    for (int ch = 0; ch < C; ++ch)
                        x.at(row, (r * P + c) * C + ch) =
                            image.at(px * P + c, py * P + r, ch) / 255.0;
        }

    Tensor projected = tape.add_rowvec(tape.matmul(x, params.patch_proj), params.patch_bias);
    Tensor inner = tape.reshape(params.inner_token, {1, cfg.embed_dim});
    Tensor outer = tape.reshape(params.outer_token, {1, cfg.embed_dim});
    Tensor tokens = tape.concat_rows({inner, outer, projected});
    return tape.add(tokens, params.pos_embed);
}

namespace {

Tensor block_forward(Tape& t, const Tensor& x, const BlockParams& b, int heads,
                     std::vector<double>* attn_avg_out) {
    const int tok = x.extent(0), d = x.extent(1);
    const int dh = d / heads;

    Tensor h = t.layer_norm(x, b.ln1_gain, b.ln1_bias);
    Tensor q = t.add_rowvec(t.matmul(h, b.wq), b.bq);
    Tensor k = t.add_rowvec(t.matmul(h, b.wk), b.bk);
    Tensor v = t.add_rowvec(t.matmul(h, b.wv), b.bv);

    if (attn_avg_out) attn_avg_out->assign(static_cast<std::size_t>(tok) * tok, 0.0);

    std::vector<Tensor> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (int i = 0; i < heads; ++i) {
        Tensor qi = t.slice_cols(q, i * dh, dh);
        Tensor ki = t.slice_cols(k, i * dh, dh);
        Tensor vi = t.slice_cols(v, i * dh, dh);
        Tensor scores = t.scale(t.matmul(qi, t.transpose(ki)), 1.0 / std::sqrt(dh));
        Tensor attn = t.softmax(scores, 1);
        if (attn_avg_out) {
            const auto& av = attn.values();
            for (std::size_t j = 0; j < av.size(); ++j)
                (*attn_avg_out)[j] += av[j] / heads;
        }
        head_outs.push_back(t.matmul(attn, vi));
    }
    Tensor merged = t.concat_cols(head_outs);
    Tensor attended = t.add(x, t.add_rowvec(t.matmul(merged, b.wo), b.bo));

    Tensor h2 = t.layer_norm(attended, b.ln2_gain, b.ln2_bias);
    Tensor hidden = t.gelu(t.add_rowvec(t.matmul(h2, b.w1), b.b1));
    Tensor mlp = t.add_rowvec(t.matmul(hidden, b.w2), b.b2);
    return t.add(attended, mlp);
}

}  // namespace

ForwardResult forward(Tape& tape, const Image8& image, const ModelParams& params,
                      bool keep_attention) {
    Tensor x = patch_embed(tape, image, params);
    ForwardResult res;
    if (keep_attention) res.attention.resize(params.blocks.size());
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        x = block_forward(tape, x, params.blocks[i], params.config.heads,
                          keep_attention ? &res.attention[i] : nullptr);
    }
    Tensor final = tape.layer_norm(x, params.final_gain, params.final_bias);
    const int d = params.config.embed_dim;
    res.pair.f_in = tape.reshape(tape.slice_rows(final, 0, 1), {d});
    res.pair.f_out = tape.reshape(tape.slice_rows(final, 1, 1), {d});
    return res;
}

IdentityPair encode(const Image8& image, const ModelParams& params) {
    Tape tape;
    const ForwardResult res = forward(tape, image, params);
    return {res.pair.f_in.values(), res.pair.f_out.values()};
}

}  // namespace ict
