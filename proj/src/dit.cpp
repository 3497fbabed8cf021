#include "melodit/dit.hpp"

namespace melodit {

void Block::setup(const TrunkConfig& cfg) {
    ln1.setup(cfg.d_model);
    ln2.setup(cfg.d_model);
    ln3.setup(cfg.d_model);
    self_attn.setup(cfg.d_model, cfg.heads);
    cross_attn.setup(cfg.d_model, cfg.heads);
    ffn.setup(cfg.d_model, static_cast<long>(cfg.d_model) * cfg.ffn_mult);
}

void Block::init(Rng& rng, int total_blocks) {
    // residual-branch output projections scaled down with depth
    const double out_std = 0.02 / std::sqrt(2.0 * total_blocks);
    self_attn.init(rng, 0.02, out_std);
    cross_attn.init(rng, 0.02, out_std);
    ffn.init(rng, 0.02, out_std);
}

Mat Block::forward(const Mat& h, const Mat& ctx, Cache* cache) const {
    Cache local;
    Cache* c = cache ? cache : &local;
    Mat n1 = ln1.forward(h, &c->ln1c);
    Mat a = h + self_attn.forward(n1, n1, &c->sa);
    Mat n2 = ln2.forward(a, &c->ln2c);
    Mat b = a + cross_attn.forward(n2, ctx, &c->ca);
    Mat n3 = ln3.forward(b, &c->ln3c);
    return b + ffn.forward(n3, &c->ff);
}

Mat Block::backward(const Mat& dout, const Cache& cache, Mat* dctx) {
    Mat dn3 = ffn.backward(dout, cache.ff);
    Mat db = dout + ln3.backward(dn3, cache.ln3c);

    Mat dn2 = cross_attn.backward(db, cache.ca, dctx);
    Mat da = db + ln2.backward(dn2, cache.ln2c);

    Mat dkv = Mat::Zero(cache.sa.ctx.rows(), cache.sa.ctx.cols());
    Mat dn1 = self_attn.backward(da, cache.sa, &dkv);
    dn1 += dkv;  // self-attention: q and k/v share the same input
    return da + ln1.backward(dn1, cache.ln1c);
}

void Block::collect(const std::string& prefix, ParamGroup g, ParamRefs& out) {
    ln1.collect(prefix + ".ln1", g, out);
    self_attn.collect(prefix + ".self_attn", g, out);
    ln2.collect(prefix + ".ln2", g, out);
    cross_attn.collect(prefix + ".cross_attn", g, out);
    ln3.collect(prefix + ".ln3", g, out);
    ffn.collect(prefix + ".ffn", g, out);
}

void TrunkParams::collect(ParamRefs& out, ParamGroup g) {
    in_proj.collect("trunk.in_proj", g, out);
    t_mlp1.collect("trunk.t_mlp1", g, out);
    t_mlp2.collect("trunk.t_mlp2", g, out);
    out.push_back({"trunk.pos", &pos, g});
    for (size_t i = 0; i < blocks.size(); i++)
        blocks[i].collect("trunk.block" + std::to_string(i), g, out);
    ln_f.collect("trunk.ln_f", g, out);
    out_proj.collect("trunk.out_proj", g, out);
}

TrunkParams init_trunk(const TrunkConfig& cfg, uint64_t seed) {
    if (cfg.blocks < 2 || cfg.blocks % 2 != 0)
        throw DataError("trunk.blocks must be even and >= 2");
    if (cfg.d_model % cfg.heads != 0) throw DataError("d_model must be divisible by heads");

    TrunkParams p;
    p.cfg = cfg;
    Rng rng(derive_seed(seed, 0x7204b, 0));
    p.in_proj.setup(cfg.d_latent, cfg.d_model);
    p.in_proj.init(rng, 0.02);
    p.t_mlp1.setup(cfg.t_feat, cfg.d_model);
    p.t_mlp1.init(rng, 0.02);
    p.t_mlp2.setup(cfg.d_model, cfg.d_model);
    p.t_mlp2.init(rng, 0.02);
    p.pos.setup(cfg.max_len, cfg.d_model);
    init_normal(p.pos, rng, 0.02);
    p.blocks.resize(cfg.blocks);
    for (auto& b : p.blocks) {
        b.setup(cfg);
        b.init(rng, cfg.blocks);
    }
    p.ln_f.setup(cfg.d_model);
    p.out_proj.setup(cfg.d_model, cfg.d_latent);
    p.out_proj.init(rng, 0.02 / std::sqrt(2.0 * cfg.blocks));
    return p;
}

Mat embed_tokens(const TrunkParams& p, const Mat& x, double t, EmbedTrace* trace) {
    const long L = x.rows();
    if (L > p.cfg.max_len) throw DataError("latent sequence exceeds trunk.max_len");
    if (x.cols() != p.cfg.d_latent) throw DataError("latent dim does not match trunk config");

    Mat tfeat = sinusoidal_features(t, p.cfg.t_feat).transpose();  // [1 x t_feat]
    Mat tm1_pre = p.t_mlp1.forward(tfeat);
    Mat tm1_act = tm1_pre.unaryExpr([](double z) { return silu(z); });
    Mat temb = p.t_mlp2.forward(tm1_act);  // [1 x d]

    Mat tok = p.in_proj.forward(x);
    tok.rowwise() += temb.row(0);
    tok += p.pos.w.topRows(L);
    if (trace) {
        trace->x = x;
        trace->tfeat = std::move(tfeat);
        trace->tm1_pre = std::move(tm1_pre);
        trace->tm1_act = std::move(tm1_act);
    }
    return tok;
}

Mat embed_tokens_backward(TrunkParams& p, const EmbedTrace& trace, const Mat& dtok) {
    const long L = dtok.rows();
    p.pos.g.topRows(L) += dtok;
    Mat dtemb = dtok.colwise().sum();  // broadcast add
    Mat dtm1_act = p.t_mlp2.backward(trace.tm1_act, dtemb);
    Mat dtm1_pre =
        dtm1_act.array() * trace.tm1_pre.unaryExpr([](double z) { return silu_grad(z); }).array();
    p.t_mlp1.backward(trace.tfeat, dtm1_pre);
    return p.in_proj.backward(trace.x, dtok);
}

Mat block_forward(const TrunkParams& p, int i, const Mat& h, const Mat& ctx, Block::Cache* cache) {
    if (i < 0 || i >= static_cast<int>(p.blocks.size())) throw DataError("block index out of range");
    return p.blocks[i].forward(h, ctx, cache);
}

Mat trunk_forward(const TrunkParams& p, const Mat& x, double t, const ConditioningBundle& cond,
                  const std::vector<Mat>* residuals, TrunkTrace* trace) {
    const long L = x.rows();
    const long P = cond.prepend.rows();
    const int n_inj = residuals ? static_cast<int>(residuals->size()) : 0;
    if (n_inj > static_cast<int>(p.blocks.size()))
        throw DataError("more residuals than trunk blocks");

    TrunkTrace local;
    TrunkTrace* tr = trace ? trace : &local;
    tr->latent_len = L;
    tr->prepend_len = P;
    tr->n_injected = n_inj;
    tr->blocks.resize(p.blocks.size());

    Mat tok = embed_tokens(p, x, t, &tr->embed);
    Mat h(P + L, p.cfg.d_model);
    h.topRows(P) = cond.prepend;
    h.bottomRows(L) = tok;

    for (size_t i = 0; i < p.blocks.size(); i++) {
        h = p.blocks[i].forward(h, cond.cross_ctx, &tr->blocks[i]);
        if (residuals && i < residuals->size()) {
            const Mat& r = (*residuals)[i];
            if (r.rows() != L || r.cols() != p.cfg.d_model)
                throw DataError("residual shape mismatch");
            h.bottomRows(L) += r;
        }
    }

    Mat latent = h.bottomRows(L);
    tr->nf = p.ln_f.forward(latent, &tr->lnf);
    return p.out_proj.forward(tr->nf);
}

TrunkGrads trunk_backward(TrunkParams& p, const TrunkTrace& trace, const Mat& dv) {
    const long L = trace.latent_len, P = trace.prepend_len;
    const long d = p.cfg.d_model;

    TrunkGrads out;
    out.d_ctx = Mat::Zero(trace.blocks[0].ca.ctx.rows(), d);
    out.d_residuals.resize(trace.n_injected);

    Mat dnf = p.out_proj.backward(trace.nf, dv);
    Mat dlat = p.ln_f.backward(dnf, trace.lnf);
    Mat dh = Mat::Zero(P + L, d);
    dh.bottomRows(L) = dlat;

    for (int i = static_cast<int>(p.blocks.size()) - 1; i >= 0; i--) {
        if (i < trace.n_injected) out.d_residuals[i] = dh.bottomRows(L);
        dh = p.blocks[i].backward(dh, trace.blocks[i], &out.d_ctx);
    }

    out.d_prepend = dh.topRows(P);
    out.d_x = embed_tokens_backward(p, trace.embed, dh.bottomRows(L));
    return out;
}

}  // namespace melodit
