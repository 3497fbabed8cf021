#pragma once

#include "melodit/dit.hpp"

#include <vector>

namespace melodit {

enum class ControlVariant { additive, cross_attention };

ControlVariant parse_control_variant(const std::string& s);

// Trainable clone of the first N trunk blocks. Residuals leave through
// zero-initialized linear projections so the fused model starts exactly
// equal to the frozen trunk.
struct ControlParams {
    int n_blocks = 0;
    ControlVariant variant = ControlVariant::additive;
    std::vector<Block> blocks;
    std::vector<Linear> zero_proj;  // [d_model x d_model], zero at init
    Linear fusion;                  // ControlSeq -> d_model

    void collect(ParamRefs& out);
};

ControlParams init_from_trunk(const TrunkParams& trunk, int n_blocks, uint64_t seed,
                              ControlVariant variant = ControlVariant::additive);

struct ControlTrace {
    long latent_len = 0, prepend_len = 0;
    EmbedTrace embed;
    Mat ctrl;  // fusion input
    std::vector<Block::Cache> blocks;
    std::vector<Mat> zin;  // latent rows feeding each zero projection
};

// Branch input = trunk token embedding of x (same projections) + fusion(ctrl)
// on the latent positions; returns one residual per cloned block.
std::vector<Mat> control_forward(const TrunkParams& trunk, const ControlParams& cp, const Mat& x,
                                 double t, const ConditioningBundle& cond, const Mat& ctrl,
                                 ControlTrace* trace);

// d_residuals come from the trunk backward pass. Returns d(ctrl); adds the
// context/prepend gradients and accumulates parameter gradients (including
// the shared token-embedding parameters on the trunk).
Mat control_backward(TrunkParams& trunk, ControlParams& cp, const ControlTrace& trace,
                     const std::vector<Mat>& d_residuals, Mat* d_ctx, Mat* d_prepend,
                     Mat* d_x = nullptr);

// trunk_forward with residuals from control_forward.
Mat fused_forward(const TrunkParams& trunk, const ControlParams& cp, const Mat& x, double t,
                  const ConditioningBundle& cond, const Mat& ctrl,
                  ControlTrace* ctrace = nullptr, TrunkTrace* ttrace = nullptr);

// Ablation: ctrl rows are appended to the cross-attention context of every
// trunk block instead of additive residuals.
Mat cross_attention_variant_forward(const TrunkParams& trunk, const ControlParams& cp,
                                    const Mat& x, double t, const ConditioningBundle& cond,
                                    const Mat& ctrl, Mat* fused_ctx = nullptr,
                                    TrunkTrace* ttrace = nullptr);

}  // namespace melodit
