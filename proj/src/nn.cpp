#include "melodit/nn.hpp"

namespace melodit {

const char* param_group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::trunk: return "trunk";
        case ParamGroup::control: return "control";
        case ParamGroup::melody: return "melody";
        case ParamGroup::cond: return "cond";
    }
    return "?";
}

void init_normal(Param& p, Rng& rng, double std_dev) {
    for (long j = 0; j < p.w.cols(); j++)
        for (long i = 0; i < p.w.rows(); i++) p.w(i, j) = std_dev * rng.gaussian();
}

// ------------------------------------------------------------------ Linear

Mat Linear::forward(const Mat& x) const {
    return (x * W.w).rowwise() + b.w.row(0);
}

Mat Linear::backward(const Mat& x, const Mat& dy) {
    W.g.noalias() += x.transpose() * dy;
    b.g.row(0) += dy.colwise().sum();
    return dy * W.w.transpose();
}

void Linear::collect(const std::string& prefix, ParamGroup g, ParamRefs& out) {
    out.push_back({prefix + ".w", &W, g});
    out.push_back({prefix + ".b", &b, g});
}

// --------------------------------------------------------------- LayerNorm

Mat LayerNorm::forward(const Mat& x, Cache* cache) const {
    const long n = x.rows(), d = x.cols();
    Mat xhat(n, d);
    Vec inv_std(n);
    for (long i = 0; i < n; i++) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().sum() / d;
        const double is = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (x.row(i).array() - mu) * is;
        inv_std(i) = is;
    }
    Mat y = (xhat.array().rowwise() * gain.w.row(0).array()).rowwise() + bias.w.row(0).array();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Mat LayerNorm::backward(const Mat& dy, const Cache& cache) {
    const long n = dy.rows(), d = dy.cols();
    gain.g.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    bias.g.row(0) += dy.colwise().sum();

    Mat dxhat = dy.array().rowwise() * gain.w.row(0).array();
    Mat dx(n, d);
    for (long i = 0; i < n; i++) {
        const double m1 = dxhat.row(i).mean();
        const double m2 = (dxhat.row(i).array() * cache.xhat.row(i).array()).mean();
        dx.row(i) = cache.inv_std(i) *
                    (dxhat.row(i).array() - m1 - cache.xhat.row(i).array() * m2);
    }
    return dx;
}

void LayerNorm::collect(const std::string& prefix, ParamGroup g, ParamRefs& out) {
    out.push_back({prefix + ".gain", &gain, g});
    out.push_back({prefix + ".bias", &bias, g});
}

// --------------------------------------------------------------- Attention

void MultiheadAttention::init(Rng& rng, double std_dev, double out_std) {
    wq.init(rng, std_dev);
    wk.init(rng, std_dev);
    wv.init(rng, std_dev);
    wo.init(rng, out_std);
}

Mat MultiheadAttention::forward(const Mat& x, const Mat& ctx, Cache* cache) const {
    const long n = x.rows(), m = ctx.rows(), d = x.cols();
    const long dh = d / heads;
    Mat q = wq.forward(x);
    Mat k = wk.forward(ctx);
    Mat v = wv.forward(ctx);

    Mat concat(n, d);
    std::vector<Mat> probs(heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < heads; h++) {
        const auto qh = q.middleCols(h * dh, dh);
        const auto kh = k.middleCols(h * dh, dh);
        const auto vh = v.middleCols(h * dh, dh);
        Mat s = qh * kh.transpose() * scale;  // [n x m]
        for (long i = 0; i < n; i++) {
            const double mx = s.row(i).maxCoeff();
            s.row(i) = (s.row(i).array() - mx).exp();
            s.row(i) /= s.row(i).sum();
        }
        concat.middleCols(h * dh, dh).noalias() = s * vh;
        probs[h] = std::move(s);
    }
    Mat y = wo.forward(concat);
    if (cache) {
        cache->x = x;
        cache->ctx = ctx;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs);
        cache->concat = std::move(concat);
        (void)m;
    }
    return y;
}

Mat MultiheadAttention::backward(const Mat& dy, const Cache& cache, Mat* dctx) {
    const long d = cache.x.cols();
    const long dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat dconcat = wo.backward(cache.concat, dy);
    Mat dq(cache.q.rows(), d), dk(cache.k.rows(), d), dv(cache.v.rows(), d);
    for (int h = 0; h < heads; h++) {
        const auto p = cache.probs[h];
        const auto qh = cache.q.middleCols(h * dh, dh);
        const auto kh = cache.k.middleCols(h * dh, dh);
        const auto vh = cache.v.middleCols(h * dh, dh);
        const auto doh = dconcat.middleCols(h * dh, dh);

        Mat dp = doh * vh.transpose();                  // [n x m]
        dv.middleCols(h * dh, dh).noalias() = p.transpose() * doh;
        // softmax backward: ds = p .* (dp - rowsum(dp .* p))
        Vec rs = (dp.array() * p.array()).rowwise().sum();
        Mat ds = p.array() * (dp.array().colwise() - rs.array());
        dq.middleCols(h * dh, dh).noalias() = ds * kh * scale;
        dk.middleCols(h * dh, dh).noalias() = ds.transpose() * qh * scale;
    }
    Mat dx = wq.backward(cache.x, dq);
    Mat dctx_local = wk.backward(cache.ctx, dk);
    dctx_local += wv.backward(cache.ctx, dv);
    if (dctx) *dctx += dctx_local;
    return dx;
}

void MultiheadAttention::collect(const std::string& prefix, ParamGroup g, ParamRefs& out) {
    wq.collect(prefix + ".wq", g, out);
    wk.collect(prefix + ".wk", g, out);
    wv.collect(prefix + ".wv", g, out);
    wo.collect(prefix + ".wo", g, out);
}

// ------------------------------------------------------------- FeedForward

void FeedForward::init(Rng& rng, double std_dev, double out_std) {
    fc1.init(rng, std_dev);
    fc2.init(rng, out_std);
}

Mat FeedForward::forward(const Mat& x, Cache* cache) const {
    Mat pre = fc1.forward(x);
    Mat act = pre.unaryExpr([](double z) { return silu(z); });
    Mat y = fc2.forward(act);
    if (cache) {
        cache->x = x;
        cache->pre = std::move(pre);
        cache->act = std::move(act);
    }
    return y;
}

Mat FeedForward::backward(const Mat& dy, const Cache& cache) {
    Mat dact = fc2.backward(cache.act, dy);
    Mat dpre = dact.array() * cache.pre.unaryExpr([](double z) { return silu_grad(z); }).array();
    return fc1.backward(cache.x, dpre);
}

void FeedForward::collect(const std::string& prefix, ParamGroup g, ParamRefs& out) {
    fc1.collect(prefix + ".fc1", g, out);
    fc2.collect(prefix + ".fc2", g, out);
}

// ------------------------------------------------------------------ Conv1d

Mat Conv1d::forward(const Mat& x, Cache* cache) const {
    const long T = x.rows(), cin = x.cols();
    const long to = out_len(T);
    const long pad = kernel / 2;
    Mat im2col;
    im2col.setZero(to, static_cast<long>(kernel) * cin);
    for (long n = 0; n < to; n++) {
        for (int t = 0; t < kernel; t++) {
            const long src = n * stride + t - pad;
            if (src < 0 || src >= T) continue;
            im2col.block(n, static_cast<long>(t) * cin, 1, cin) = x.row(src);
        }
    }
    Mat y = (im2col * W.w).rowwise() + b.w.row(0);
    if (cache) {
        cache->im2col = std::move(im2col);
        cache->in_len = T;
        cache->in_ch = cin;
    }
    return y;
}

Mat Conv1d::backward(const Mat& dy, const Cache& cache) {
    W.g.noalias() += cache.im2col.transpose() * dy;
    b.g.row(0) += dy.colwise().sum();
    Mat dcol = dy * W.w.transpose();  // [To x kernel*cin]
    Mat dx;
    dx.setZero(cache.in_len, cache.in_ch);
    const long pad = kernel / 2;
    for (long n = 0; n < dcol.rows(); n++) {
        for (int t = 0; t < kernel; t++) {
            const long src = n * stride + t - pad;
            if (src < 0 || src >= cache.in_len) continue;
            dx.row(src) += dcol.block(n, static_cast<long>(t) * cache.in_ch, 1, cache.in_ch);
        }
    }
    return dx;
}

void Conv1d::collect(const std::string& prefix, ParamGroup g, ParamRefs& out) {
    out.push_back({prefix + ".w", &W, g});
    out.push_back({prefix + ".b", &b, g});
}

// --------------------------------------------------------------- Embedding

Mat EmbeddingTable::lookup(const std::vector<int>& ids) const {
    Mat out(static_cast<long>(ids.size()), table.w.cols());
    for (size_t i = 0; i < ids.size(); i++) {
        if (ids[i] < 0 || ids[i] >= table.w.rows())
            throw DataError("embedding index out of vocabulary: " + std::to_string(ids[i]));
        out.row(static_cast<long>(i)) = table.w.row(ids[i]);
    }
    return out;
}

void EmbeddingTable::backward(const std::vector<int>& ids, const Mat& dy) {
    for (size_t i = 0; i < ids.size(); i++)
        table.g.row(ids[i]) += dy.row(static_cast<long>(i));
}

void EmbeddingTable::collect(const std::string& prefix, ParamGroup g, ParamRefs& out) {
    out.push_back({prefix + ".table", &table, g});
}

// ------------------------------------------------------------------- misc

Vec sinusoidal_features(double x, int dim) {
    if (dim % 2 != 0) throw DataError("sinusoidal feature dim must be even");
    Vec out(dim);
    const int half = dim / 2;
    const double log_lo = std::log(0.25), log_hi = std::log(1000.0);
    for (int j = 0; j < half; j++) {
        const double t = half == 1 ? 0.0 : static_cast<double>(j) / (half - 1);
        const double omega = std::exp(log_lo + (log_hi - log_lo) * t);
        out(2 * j) = std::sin(omega * x);
        out(2 * j + 1) = std::cos(omega * x);
    }
    return out;
}

uint64_t hash_params(const ParamRefs& refs, ParamGroup group) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& r : refs)
        if (r.group == group) h = hash_mat(r.p->w, h);
    return h;
}

long count_params(const ParamRefs& refs, ParamGroup group) {
    long n = 0;
    for (const auto& r : refs)
        if (r.group == group) n += r.p->size();
    return n;
}

}  // namespace melodit
