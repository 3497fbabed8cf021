#include "melodit/controlnet.hpp"

namespace melodit {

ControlVariant parse_control_variant(const std::string& s) {
    if (s == "additive") return ControlVariant::additive;
    if (s == "cross_attention") return ControlVariant::cross_attention;
    throw UsageError("control.variant must be additive or cross_attention: " + s);
}

void ControlParams::collect(ParamRefs& out) {
    for (size_t i = 0; i < blocks.size(); i++)
        blocks[i].collect("control.block" + std::to_string(i), ParamGroup::control, out);
    for (size_t i = 0; i < zero_proj.size(); i++)
        zero_proj[i].collect("control.zero_proj" + std::to_string(i), ParamGroup::control, out);
    fusion.collect("control.fusion", ParamGroup::control, out);
}

ControlParams init_from_trunk(const TrunkParams& trunk, int n_blocks, uint64_t seed,
                              ControlVariant variant) {
    if (n_blocks > static_cast<int>(trunk.blocks.size()))
        throw DataError("control.n_blocks exceeds trunk blocks");
    const long d = trunk.cfg.d_model;

    ControlParams cp;
    cp.n_blocks = n_blocks;
    cp.variant = variant;
    cp.blocks.assign(trunk.blocks.begin(), trunk.blocks.begin() + n_blocks);  // deep copy
    cp.zero_proj.resize(n_blocks);
    for (auto& z : cp.zero_proj) z.setup(d, d);  // exactly zero
    Rng rng(derive_seed(seed, 0xc7a1, 0));
    cp.fusion.setup(d, d);
    cp.fusion.init(rng, 0.02);
    return cp;
}

std::vector<Mat> control_forward(const TrunkParams& trunk, const ControlParams& cp, const Mat& x,
                                 double t, const ConditioningBundle& cond, const Mat& ctrl,
                                 ControlTrace* trace) {
    const long L = x.rows();
    const long P = cond.prepend.rows();
    if (ctrl.rows() != L) throw DataError("control sequence length does not match latent length");
    if (ctrl.cols() != trunk.cfg.d_model) throw DataError("control sequence width mismatch");

    ControlTrace local;
    ControlTrace* tr = trace ? trace : &local;
    tr->latent_len = L;
    tr->prepend_len = P;
    tr->ctrl = ctrl;
    tr->blocks.resize(cp.n_blocks);
    tr->zin.resize(cp.n_blocks);

    Mat tok = embed_tokens(trunk, x, t, &tr->embed);
    tok += cp.fusion.forward(ctrl);
    Mat g(P + L, trunk.cfg.d_model);
    g.topRows(P) = cond.prepend;
    g.bottomRows(L) = tok;

    std::vector<Mat> residuals(cp.n_blocks);
    for (int i = 0; i < cp.n_blocks; i++) {
        g = cp.blocks[i].forward(g, cond.cross_ctx, &tr->blocks[i]);
        tr->zin[i] = g.bottomRows(L);
        residuals[i] = cp.zero_proj[i].forward(tr->zin[i]);
    }
    return residuals;
}

Mat control_backward(TrunkParams& trunk, ControlParams& cp, const ControlTrace& trace,
                     const std::vector<Mat>& d_residuals, Mat* d_ctx, Mat* d_prepend, Mat* d_x) {
    const long L = trace.latent_len, P = trace.prepend_len;
    const long d = trunk.cfg.d_model;

    Mat dg = Mat::Zero(P + L, d);
    for (int i = cp.n_blocks - 1; i >= 0; i--) {
        Mat dlat = cp.zero_proj[i].backward(trace.zin[i], d_residuals[i]);
        dg.bottomRows(L) += dlat;
        dg = cp.blocks[i].backward(dg, trace.blocks[i], d_ctx);
    }
    if (d_prepend) *d_prepend += dg.topRows(P);

    Mat dtok = dg.bottomRows(L);
    Mat dctrl = cp.fusion.backward(trace.ctrl, dtok);
    Mat dx = embed_tokens_backward(trunk, trace.embed, dtok);
    if (d_x) *d_x += dx;
    return dctrl;
}

Mat fused_forward(const TrunkParams& trunk, const ControlParams& cp, const Mat& x, double t,
                  const ConditioningBundle& cond, const Mat& ctrl, ControlTrace* ctrace,
                  TrunkTrace* ttrace) {
    std::vector<Mat> residuals = control_forward(trunk, cp, x, t, cond, ctrl, ctrace);
    return trunk_forward(trunk, x, t, cond, &residuals, ttrace);
}

Mat cross_attention_variant_forward(const TrunkParams& trunk, const ControlParams& cp,
                                    const Mat& x, double t, const ConditioningBundle& cond,
                                    const Mat& ctrl, Mat* fused_ctx, TrunkTrace* ttrace) {
    if (cp.variant != ControlVariant::cross_attention)
        throw UsageError("cross_attention_variant_forward requires control.variant=cross_attention");
    if (ctrl.cols() != trunk.cfg.d_model) throw DataError("control sequence width mismatch");

    Mat proj = cp.fusion.forward(ctrl);
    ConditioningBundle aug = cond;
    aug.cross_ctx.resize(cond.cross_ctx.rows() + proj.rows(), trunk.cfg.d_model);
    aug.cross_ctx.topRows(cond.cross_ctx.rows()) = cond.cross_ctx;
    aug.cross_ctx.bottomRows(proj.rows()) = proj;
    if (fused_ctx) *fused_ctx = aug.cross_ctx;
    return trunk_forward(trunk, x, t, aug, nullptr, ttrace);
}

}  // namespace melodit
