#pragma once

#include "melodit/audio.hpp"
#include "melodit/nn.hpp"

#include <optional>
#include <string>
#include <vector>

namespace melodit {

struct TimingSpec {
    double seconds_start = 0;
    double seconds_total = 0;
};

// Toy text conditioning: a learned embedding row per tag plus a learned
// null-text token; timing delivered as two prepended tokens.
struct CondParams {
    std::vector<std::string> vocab;
    EmbeddingTable tag_table;   // [vocab x d_model]
    Param null_token;           // [1 x d_model]
    Linear timing_proj;         // sinusoidal feat -> d_model
    int time_feat_dim = 64;

    void setup(const std::vector<std::string>& vocabulary, long d_model, uint64_t seed);
    int tag_id(const std::string& tag) const;
    void collect(ParamRefs& out);
};

struct ConditioningBundle {
    Mat prepend;     // [P x d_model], P >= 2 (timing tokens)
    Mat cross_ctx;   // [C x d_model]
    bool is_null_text = false;

    // inputs retained for the backward pass
    std::vector<int> tag_ids;
    TimingSpec timing;
    Mat timing_feats;  // [2 x feat]
};

Mat encode_tags(const TagSet& tags, const CondParams& params);
Mat timing_embed(const TimingSpec& spec, const CondParams& params);
ConditioningBundle build_conditioning(const CondParams& params, const TagSet& tags,
                                      const TimingSpec& timing, bool null_text);

// Routes d(prepend) and d(cross_ctx) into the conditioning tables.
void conditioning_backward(CondParams& params, const ConditioningBundle& bundle,
                           const Mat& dprepend, const Mat& dctx);

}  // namespace melodit
