#pragma once

#include "melodit/conditioning.hpp"
#include "melodit/nn.hpp"

#include <optional>
#include <vector>

namespace melodit {

struct TrunkConfig {
    int blocks = 8;
    int d_model = 128;
    int heads = 4;
    int ffn_mult = 4;
    int d_latent = 128;  // 2 * codec patch
    int max_len = 1024;
    int t_feat = 64;
};

// Pre-norm transformer block: self-attention, cross-attention, feedforward,
// residual connections around each.
struct Block {
    LayerNorm ln1, ln2, ln3;
    MultiheadAttention self_attn, cross_attn;
    FeedForward ffn;

    struct Cache {
        LayerNorm::Cache ln1c, ln2c, ln3c;
        MultiheadAttention::Cache sa, ca;
        FeedForward::Cache ff;
    };

    void setup(const TrunkConfig& cfg);
    void init(Rng& rng, int total_blocks);
    Mat forward(const Mat& h, const Mat& ctx, Cache* cache) const;
    // returns dh; adds context gradient into *dctx
    Mat backward(const Mat& dout, const Cache& cache, Mat* dctx);
    void collect(const std::string& prefix, ParamGroup g, ParamRefs& out);
};

struct TrunkParams {
    TrunkConfig cfg;
    Linear in_proj;           // d_latent -> d_model
    Linear t_mlp1, t_mlp2;    // timestep embedding MLP
    Param pos;                // [max_len x d_model], learned absolute
    std::vector<Block> blocks;
    LayerNorm ln_f;
    Linear out_proj;          // d_model -> d_latent

    void collect(ParamRefs& out, ParamGroup g = ParamGroup::trunk);
};

TrunkParams init_trunk(const TrunkConfig& cfg, uint64_t seed);

// Token embedding shared by the trunk and the control branch:
// in_proj(x) + timestep embedding (broadcast) + learned positions.
struct EmbedTrace {
    Mat x;        // [L x d_latent]
    Mat tfeat;    // [1 x t_feat]
    Mat tm1_pre;  // [1 x d]
    Mat tm1_act;
};
Mat embed_tokens(const TrunkParams& p, const Mat& x, double t, EmbedTrace* trace);
// Accumulates in_proj / t_mlp / pos gradients for one embedding path;
// returns the gradient w.r.t. the latent input x.
Mat embed_tokens_backward(TrunkParams& p, const EmbedTrace& trace, const Mat& dtok);

struct TrunkTrace {
    long latent_len = 0, prepend_len = 0;
    int n_injected = 0;
    EmbedTrace embed;
    std::vector<Block::Cache> blocks;
    LayerNorm::Cache lnf;
    Mat nf;  // ln_f output (input of out_proj)
};

// residuals, when present, are added to the latent positions after blocks
// 0..residuals->size()-1. Returns v_hat [L x d_latent].
Mat trunk_forward(const TrunkParams& p, const Mat& x, double t, const ConditioningBundle& cond,
                  const std::vector<Mat>* residuals, TrunkTrace* trace);

Mat block_forward(const TrunkParams& p, int i, const Mat& h, const Mat& ctx,
                  Block::Cache* cache);

struct TrunkGrads {
    std::vector<Mat> d_residuals;
    Mat d_prepend;
    Mat d_ctx;
    Mat d_x;
};

TrunkGrads trunk_backward(TrunkParams& p, const TrunkTrace& trace, const Mat& dv);

}  // namespace melodit
