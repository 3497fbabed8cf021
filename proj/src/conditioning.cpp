#include "melodit/conditioning.hpp"

#include <algorithm>

namespace melodit {

void CondParams::setup(const std::vector<std::string>& vocabulary, long d_model, uint64_t seed) {
    vocab = vocabulary;
    Rng rng(derive_seed(seed, 0xc17d0ull, 1));
    tag_table.setup(static_cast<long>(vocab.size()), d_model);
    tag_table.init(rng, 0.02);
    null_token.setup(1, d_model);
    init_normal(null_token, rng, 0.02);
    timing_proj.setup(time_feat_dim, d_model);
    timing_proj.init(rng, 0.02);
}

int CondParams::tag_id(const std::string& tag) const {
    auto it = std::find(vocab.begin(), vocab.end(), tag);
    if (it == vocab.end()) throw DataError("unknown tag: " + tag);
    return static_cast<int>(it - vocab.begin());
}

Mat encode_tags(const TagSet& tags, const CondParams& params) {
    std::vector<int> ids;
    for (const auto& t : tags.tags) ids.push_back(params.tag_id(t));
    return params.tag_table.lookup(ids);
}

Mat timing_embed(const TimingSpec& spec, const CondParams& params) {
    Mat feats(2, params.time_feat_dim);
    feats.row(0) = sinusoidal_features(spec.seconds_start, params.time_feat_dim).transpose();
    feats.row(1) = sinusoidal_features(spec.seconds_total, params.time_feat_dim).transpose();
    return params.timing_proj.forward(feats);
}

ConditioningBundle build_conditioning(const CondParams& params, const TagSet& tags,
                                      const TimingSpec& timing, bool null_text) {
    if (timing.seconds_total <= 0) throw DataError("seconds_total must be positive");
    if (timing.seconds_start < 0 || timing.seconds_start >= timing.seconds_total)
        throw DataError("seconds_start must be in [0, seconds_total)");

    ConditioningBundle b;
    b.timing = timing;
    b.is_null_text = null_text;
    b.timing_feats.resize(2, params.time_feat_dim);
    b.timing_feats.row(0) = sinusoidal_features(timing.seconds_start, params.time_feat_dim).transpose();
    b.timing_feats.row(1) = sinusoidal_features(timing.seconds_total, params.time_feat_dim).transpose();
    b.prepend = params.timing_proj.forward(b.timing_feats);

    if (null_text) {
        b.cross_ctx = params.null_token.w;
    } else {
        if (tags.tags.empty()) throw DataError("conditional clip needs a non-empty tag set");
        for (const auto& t : tags.tags) b.tag_ids.push_back(params.tag_id(t));
        b.cross_ctx = params.tag_table.lookup(b.tag_ids);
    }
    return b;
}

void conditioning_backward(CondParams& params, const ConditioningBundle& bundle,
                           const Mat& dprepend, const Mat& dctx) {
    params.timing_proj.backward(bundle.timing_feats, dprepend);
    if (bundle.is_null_text) {
        params.null_token.g += dctx;
    } else {
        params.tag_table.backward(bundle.tag_ids, dctx);
    }
}

}  // namespace melodit
