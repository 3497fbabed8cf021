#include "melodit/model.hpp"

#include <algorithm>

namespace melodit {

ModelConfig ModelConfig::from_run(const RunConfig& rc) {
    ModelConfig cfg;
    cfg.trunk.blocks = rc.get_int("trunk.blocks");
    cfg.trunk.d_model = rc.get_int("trunk.d_model");
    cfg.trunk.heads = rc.get_int("trunk.heads");
    cfg.trunk.ffn_mult = rc.get_int("trunk.ffn_mult");
    cfg.trunk.max_len = rc.get_int("trunk.max_len");
    cfg.trunk.d_latent = 2 * rc.get_int("codec.patch");
    cfg.control_blocks = rc.get_int("control.n_blocks");
    cfg.variant = parse_control_variant(rc.get("control.variant"));
    cfg.melody_embed_dim = rc.get_int("melody.embed_dim");
    cfg.melody_hidden = rc.get_int("melody.hidden");
    cfg.conv_kernels = rc.get_int_list("melody.conv_kernels");
    cfg.conv_strides = rc.get_int_list("melody.conv_strides");
    cfg.text_drop_prob = rc.get_double("cond.text_drop_prob");
    cfg.vocab = tag_vocabulary();
    return cfg;
}

FreezeFlags FreezeFlags::from_list(const std::vector<std::string>& groups) {
    FreezeFlags f;
    f.trunk = f.control = f.melody = f.cond = false;
    for (const auto& g : groups) {
        if (g == "trunk") f.trunk = true;
        else if (g == "control") f.control = true;
        else if (g == "melody") f.melody = true;
        else if (g == "cond") f.cond = true;
        else if (g.empty()) continue;
        else throw UsageError("unknown freeze group: " + g);
    }
    return f;
}

ParamRefs ModelParams::collect() {
    ParamRefs refs;
    trunk.collect(refs);
    control.collect(refs);
    melody.collect(refs);
    cond.collect(refs);
    return refs;
}

void ModelParams::zero_grad() {
    for (auto& r : collect()) r.p->zero_grad();
}

void ModelParams::clone_control_from_trunk(uint64_t seed) {
    control = init_from_trunk(trunk, cfg.control_blocks, seed, cfg.variant);
}

ModelParams ModelParams::init(const ModelConfig& cfg, uint64_t seed) {
    ModelParams m;
    m.cfg = cfg;
    m.trunk = init_trunk(cfg.trunk, seed);
    m.control = init_from_trunk(m.trunk, cfg.control_blocks, seed, cfg.variant);
    m.melody.setup(cfg.melody_embed_dim, cfg.melody_hidden, cfg.trunk.d_model, cfg.conv_kernels,
                   cfg.conv_strides, seed);
    m.cond.setup(cfg.vocab, cfg.trunk.d_model, seed);
    return m;
}

Mat model_forward(const ModelParams& m, const Mat& x_t, double t, const TagSet& tags,
                  const TimingSpec& timing, bool null_text, const MelodyPrompt& prompt,
                  bool use_control, ModelTrace* trace) {
    ModelTrace local;
    ModelTrace* tr = trace ? trace : &local;
    tr->bundle = build_conditioning(m.cond, tags, timing, null_text);
    tr->used_control = use_control;
    if (!use_control)
        return trunk_forward(m.trunk, x_t, t, tr->bundle, nullptr, &tr->trunk);

    tr->ctrl = encode_melody(m.melody, prompt, x_t.rows(), &tr->melody);
    if (m.cfg.variant == ControlVariant::cross_attention) {
        ConditioningBundle aug = tr->bundle;
        tr->xattn_ctrl_proj = m.control.fusion.forward(tr->ctrl);
        aug.cross_ctx.conservativeResize(tr->bundle.cross_ctx.rows() + tr->xattn_ctrl_proj.rows(),
                                         Eigen::NoChange);
        aug.cross_ctx.bottomRows(tr->xattn_ctrl_proj.rows()) = tr->xattn_ctrl_proj;
        return trunk_forward(m.trunk, x_t, t, aug, nullptr, &tr->trunk);
    }
    return fused_forward(m.trunk, m.control, x_t, t, tr->bundle, tr->ctrl, &tr->control,
                         &tr->trunk);
}

void model_backward(ModelParams& m, const ModelTrace& trace, const Mat& dv) {
    TrunkGrads tg = trunk_backward(m.trunk, trace.trunk, dv);

    if (!trace.used_control) {
        conditioning_backward(m.cond, trace.bundle, tg.d_prepend, tg.d_ctx);
        return;
    }

    if (m.cfg.variant == ControlVariant::cross_attention) {
        const long c_text = trace.bundle.cross_ctx.rows();
        const long c_ctrl = trace.xattn_ctrl_proj.rows();
        Mat d_text_ctx = tg.d_ctx.topRows(c_text);
        Mat d_proj = tg.d_ctx.bottomRows(c_ctrl);
        Mat dctrl = m.control.fusion.backward(trace.ctrl, d_proj);
        melody_backward(m.melody, trace.melody, dctrl);
        conditioning_backward(m.cond, trace.bundle, tg.d_prepend, d_text_ctx);
        return;
    }

    Mat dctrl = control_backward(m.trunk, m.control, trace.control, tg.d_residuals, &tg.d_ctx,
                                 &tg.d_prepend);
    melody_backward(m.melody, trace.melody, dctrl);
    conditioning_backward(m.cond, trace.bundle, tg.d_prepend, tg.d_ctx);
}

}  // namespace melodit
