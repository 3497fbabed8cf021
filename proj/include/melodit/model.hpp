#pragma once

#include "melodit/codec.hpp"
#include "melodit/conditioning.hpp"
#include "melodit/config.hpp"
#include "melodit/controlnet.hpp"
#include "melodit/melody_encoder.hpp"

namespace melodit {

struct ModelConfig {
    TrunkConfig trunk;
    int control_blocks = 4;
    ControlVariant variant = ControlVariant::additive;
    int melody_embed_dim = 16;
    int melody_hidden = 128;
    std::vector<int> conv_kernels{5, 5, 5};
    std::vector<int> conv_strides{1, 1, 1};
    std::vector<std::string> vocab;
    double text_drop_prob = 0.1;

    static ModelConfig from_run(const RunConfig& rc);
};

struct FreezeFlags {
    bool trunk = true;
    bool control = false;
    bool melody = false;
    bool cond = true;

    bool frozen(ParamGroup g) const {
        switch (g) {
            case ParamGroup::trunk: return trunk;
            case ParamGroup::control: return control;
            case ParamGroup::melody: return melody;
            case ParamGroup::cond: return cond;
        }
        return false;
    }
    static FreezeFlags from_list(const std::vector<std::string>& groups);
};

// All trainable weights with per-group freeze flags.
struct ModelParams {
    ModelConfig cfg;
    TrunkParams trunk;
    ControlParams control;
    MelodyEncoderParams melody;
    CondParams cond;
    FreezeFlags freeze;

    ParamRefs collect();
    void zero_grad();
    // re-clone the control branch from the (possibly trained) trunk
    void clone_control_from_trunk(uint64_t seed);

    static ModelParams init(const ModelConfig& cfg, uint64_t seed);
};

struct ModelTrace {
    ConditioningBundle bundle;
    MelodyTrace melody;
    Mat ctrl;
    ControlTrace control;
    TrunkTrace trunk;
    Mat xattn_ctrl_proj;  // cross-attention variant only
    bool used_control = false;
};

// Full conditional forward: build conditioning, encode (masked) melody, run
// the fused trunk+branch. use_control=false runs the bare trunk (the
// pretraining path; the melody prompt is ignored).
Mat model_forward(const ModelParams& m, const Mat& x_t, double t, const TagSet& tags,
                  const TimingSpec& timing, bool null_text, const MelodyPrompt& prompt,
                  bool use_control, ModelTrace* trace);

// Accumulates gradients for every parameter group (freeze only affects the
// optimizer update, so finite-difference checks can exercise all groups).
void model_backward(ModelParams& m, const ModelTrace& trace, const Mat& dv);

}  // namespace melodit
