#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ict/image.hpp"
#include "ict/tensor.hpp"

namespace ict {

struct ICTConfig {
    int image_h = 112;
    int image_w = 112;
    int grid = 14;  // g x g non-overlapping patches; patch side P = H / g
    int channels = 3;
    int embed_dim = 384;
    int depth = 12;
    int heads = 12;
    int mlp_ratio = 4;
    int n_identities = 0;

    int patch() const { return image_h / grid; }
    int n_patches() const { return grid * grid; }
    int n_tokens() const { return n_patches() + 2; }  // inner + outer + patches
    int patch_dim() const { return patch() * patch() * channels; }
    int mlp_hidden() const { return embed_dim * mlp_ratio; }

    void validate() const;

    static ICTConfig desk(int n_identities = 0);   // 56x56, 7x7 grid, D=128, depth 4, heads 4
    static ICTConfig paper(int n_identities = 0);  // 112x112, 14x14 grid, D=384, depth 12, heads 12
};

struct BlockParams {
    Tensor ln1_gain, ln1_bias;
    Tensor wq, bq, wk, bk, wv, bv;
    Tensor wo, bo;
    Tensor ln2_gain, ln2_bias;
    Tensor w1, b1, w2, b2;
};

struct ModelParams {
    ICTConfig config;
    Tensor patch_proj;   // [P^2 C, D]
    Tensor patch_bias;   // [D]
    Tensor inner_token;  // [D]
    Tensor outer_token;  // [D]
    Tensor pos_embed;    // [N+2, D]
    std::vector<BlockParams> blocks;
    Tensor final_gain, final_bias;
    Tensor head;  // [D, n_identities], no bias; columns renormalized each use

    static ModelParams init(const ICTConfig& config, std::uint64_t seed);
    // Declared parameter order; drives checkpoints and the optimizer.
    std::vector<Tensor> all() const;
};

void set_params_requires_grad(ModelParams& params, bool requires_grad);

// Identity vectors straight out of the encoder (un-normalized).
struct IdentityPairT {
    Tensor f_in;
    Tensor f_out;
};

struct IdentityPair {
    std::vector<double> f_in;
    std::vector<double> f_out;
};

struct ForwardResult {
    IdentityPairT pair;
    // Head-averaged attention per block, [T x T] row-stochastic values;
    // filled only when requested.
    std::vector<std::vector<double>> attention;
};

// Tokens with position embeddings added: [(N+2) x D], inner token at row 0,
// outer token at row 1.
Tensor patch_embed(Tape& tape, const Image8& image, const ModelParams& params);

ForwardResult forward(Tape& tape, const Image8& image, const ModelParams& params,
                      bool keep_attention = false);

// Inference convenience: runs forward on a private tape, returns raw values.
IdentityPair encode(const Image8& image, const ModelParams& params);

}  // namespace ict
