#include "melodit/melody_encoder.hpp"

namespace melodit {

void MelodyEncoderParams::setup(int e_dim, int hidden, int d_model,
                                const std::vector<int>& kernels, const std::vector<int>& strides,
                                uint64_t seed) {
    if (kernels.size() != strides.size() || kernels.empty())
        throw DataError("melody conv kernels/strides must be non-empty and equal length");
    embed_dim = e_dim;
    Rng rng(derive_seed(seed, 0x3e10d, 0));
    embed.setup(129, e_dim);
    embed.init(rng, 0.02);

    convs.clear();
    long in_ch = 8L * e_dim;
    for (size_t i = 0; i < kernels.size(); i++) {
        const bool last = i + 1 == kernels.size();
        Conv1d conv;
        conv.setup(in_ch, last ? d_model : hidden, kernels[i], strides[i]);
        conv.init(rng, 0.02);
        convs.push_back(std::move(conv));
        in_ch = last ? d_model : hidden;
    }
}

long MelodyEncoderParams::stride_product() const {
    long s = 1;
    for (const auto& c : convs) s *= c.stride;
    return s;
}

void MelodyEncoderParams::collect(ParamRefs& out) {
    embed.collect("melody.embed", ParamGroup::melody, out);
    for (size_t i = 0; i < convs.size(); i++)
        convs[i].collect("melody.conv" + std::to_string(i), ParamGroup::melody, out);
}

Mat embed_prompt(const MelodyPrompt& prompt, const MelodyEncoderParams& params,
                 std::vector<int>* flat_ids) {
    const int F = prompt.frames();
    const int E = params.embed_dim;
    Mat out(F, 8L * E);
    std::vector<int> ids;
    ids.reserve(static_cast<size_t>(F) * 8);
    for (int f = 0; f < F; f++) {
        for (int r = 0; r < 8; r++) {
            const int v = prompt.pitches(r, f);
            if (v < 0 || v > 128) throw DataError("prompt value out of vocabulary");
            out.block(f, static_cast<long>(r) * E, 1, E) = params.embed.table.w.row(v);
            ids.push_back(v);
        }
    }
    if (flat_ids) *flat_ids = std::move(ids);
    return out;
}

Mat downsample(const Mat& framewise, const MelodyEncoderParams& params, long target_len,
               MelodyTrace* trace) {
    MelodyTrace local;
    MelodyTrace* tr = trace ? trace : &local;
    tr->conv_caches.resize(params.convs.size());
    tr->conv_pre.resize(params.convs.size());
    tr->target_len = target_len;

    Mat x = framewise;
    for (size_t i = 0; i < params.convs.size(); i++) {
        Mat pre = params.convs[i].forward(x, &tr->conv_caches[i]);
        tr->conv_pre[i] = pre;
        if (i + 1 < params.convs.size())
            x = pre.unaryExpr([](double z) { return silu(z); });
        else
            x = std::move(pre);
    }

    tr->raw_len = x.rows();
    const long diff = tr->raw_len - target_len;
    if (diff > 1 || diff < -1)
        throw DataError("melody conv strides misconfigured: output length " +
                        std::to_string(tr->raw_len) + " vs latent length " +
                        std::to_string(target_len));
    if (diff == 1) return x.topRows(target_len);
    if (diff == -1) {
        Mat padded = Mat::Zero(target_len, x.cols());
        padded.topRows(tr->raw_len) = x;
        return padded;
    }
    return x;
}

Mat encode_melody(const MelodyEncoderParams& params, const MelodyPrompt& prompt,
                  long target_len, MelodyTrace* trace) {
    MelodyTrace local;
    MelodyTrace* tr = trace ? trace : &local;
    Mat framewise = embed_prompt(prompt, params, &tr->flat_ids);
    tr->framewise = framewise;
    return downsample(framewise, params, target_len, tr);
}

void melody_backward(MelodyEncoderParams& params, const MelodyTrace& trace, const Mat& dctrl) {
    // undo the truncate/pad reconciliation
    Mat dx;
    if (trace.raw_len == trace.target_len + 1) {
        dx = Mat::Zero(trace.raw_len, dctrl.cols());
        dx.topRows(trace.target_len) = dctrl;
    } else if (trace.raw_len == trace.target_len - 1) {
        dx = dctrl.topRows(trace.raw_len);
    } else {
        dx = dctrl;
    }

    for (int i = static_cast<int>(params.convs.size()) - 1; i >= 0; i--) {
        if (i + 1 < static_cast<int>(params.convs.size())) {
            dx = dx.array() *
                 trace.conv_pre[i].unaryExpr([](double z) { return silu_grad(z); }).array();
        }
        dx = params.convs[i].backward(dx, trace.conv_caches[i]);
    }
    params.embed.backward(trace.flat_ids, [&] {
        // reshape [F x 8E] gradient into 8F rows of E
        const long F = dx.rows();
        const int E = params.embed_dim;
        Mat rows(F * 8, E);
        for (long f = 0; f < F; f++)
            for (int r = 0; r < 8; r++)
                rows.row(f * 8 + r) = dx.block(f, static_cast<long>(r) * E, 1, E);
        return rows;
    }());
}

}  // namespace melodit
