#pragma once

#include "melodit/common.hpp"
#include "melodit/rng.hpp"

#include <string>
#include <vector>

namespace melodit {

enum class ParamGroup { trunk, control, melody, cond };

const char* param_group_name(ParamGroup g);

struct Param {
    Mat w;
    Mat g;

    void setup(long rows, long cols) {
        w.setZero(rows, cols);
        g.setZero(rows, cols);
    }
    void zero_grad() { g.setZero(w.rows(), w.cols()); }
    long size() const { return w.size(); }
};

struct ParamRef {
    std::string name;
    Param* p;
    ParamGroup group;
};

using ParamRefs = std::vector<ParamRef>;

void init_normal(Param& p, Rng& rng, double std_dev);

inline double silu(double z) {
    const double s = 1.0 / (1.0 + std::exp(-z));
    return z * s;
}
inline double silu_grad(double z) {
    const double s = 1.0 / (1.0 + std::exp(-z));
    return s * (1.0 + z * (1.0 - s));
}

// y = x*W + b, x is [n x in]
struct Linear {
    Param W;  // [in x out]
    Param b;  // [1 x out]

    void setup(long in, long out) {
        W.setup(in, out);
        b.setup(1, out);
    }
    void init(Rng& rng, double std_dev) {
        init_normal(W, rng, std_dev);
        b.w.setZero();
    }
    long in_dim() const { return W.w.rows(); }
    long out_dim() const { return W.w.cols(); }

    Mat forward(const Mat& x) const;
    Mat backward(const Mat& x, const Mat& dy);  // accumulates grads, returns dx
    void collect(const std::string& prefix, ParamGroup g, ParamRefs& out);
};

struct LayerNorm {
    Param gain;  // [1 x d]
    Param bias;  // [1 x d]
    double eps = 1e-5;

    struct Cache {
        Mat xhat;
        Vec inv_std;
    };

    void setup(long d) {
        gain.setup(1, d);
        gain.w.setOnes();
        bias.setup(1, d);
    }
    Mat forward(const Mat& x, Cache* cache) const;
    Mat backward(const Mat& dy, const Cache& cache);
    void collect(const std::string& prefix, ParamGroup g, ParamRefs& out);
};

// Multi-head attention; self-attention when ctx == x.
struct MultiheadAttention {
    int heads = 1;
    Linear wq, wk, wv, wo;

    struct Cache {
        Mat x, ctx;
        Mat q, k, v;
        std::vector<Mat> probs;  // per head [n x m]
        Mat concat;              // [n x d]
    };

    void setup(long d, int n_heads) {
        heads = n_heads;
        wq.setup(d, d);
        wk.setup(d, d);
        wv.setup(d, d);
        wo.setup(d, d);
    }
    void init(Rng& rng, double std_dev, double out_std);
    Mat forward(const Mat& x, const Mat& ctx, Cache* cache) const;
    // returns dx; adds the context gradient into *dctx when given
    Mat backward(const Mat& dy, const Cache& cache, Mat* dctx);
    void collect(const std::string& prefix, ParamGroup g, ParamRefs& out);
};

struct FeedForward {
    Linear fc1, fc2;

    struct Cache {
        Mat x;
        Mat pre;  // fc1 output before activation
        Mat act;
    };

    void setup(long d, long hidden) {
        fc1.setup(d, hidden);
        fc2.setup(hidden, d);
    }
    void init(Rng& rng, double std_dev, double out_std);
    Mat forward(const Mat& x, Cache* cache) const;
    Mat backward(const Mat& dy, const Cache& cache);
    void collect(const std::string& prefix, ParamGroup g, ParamRefs& out);
};

// Centered strided 1D convolution over [T x channels] sequences.
struct Conv1d {
    int kernel = 1, stride = 1;
    Param W;  // [kernel*in x out]
    Param b;  // [1 x out]

    struct Cache {
        Mat im2col;  // [To x kernel*in]
        long in_len = 0;
        long in_ch = 0;
    };

    void setup(long in_ch, long out_ch, int k, int s) {
        kernel = k;
        stride = s;
        W.setup(static_cast<long>(k) * in_ch, out_ch);
        b.setup(1, out_ch);
    }
    void init(Rng& rng, double std_dev) {
        init_normal(W, rng, std_dev);
        b.w.setZero();
    }
    long out_len(long in_len) const { return (in_len + stride - 1) / stride; }

    Mat forward(const Mat& x, Cache* cache) const;
    Mat backward(const Mat& dy, const Cache& cache);
    void collect(const std::string& prefix, ParamGroup g, ParamRefs& out);
};

struct EmbeddingTable {
    Param table;  // [vocab x dim]

    void setup(long vocab, long dim) { table.setup(vocab, dim); }
    void init(Rng& rng, double std_dev) { init_normal(table, rng, std_dev); }
    Mat lookup(const std::vector<int>& ids) const;
    void backward(const std::vector<int>& ids, const Mat& dy);
    void collect(const std::string& prefix, ParamGroup g, ParamRefs& out);
};

// Sinusoidal features of a scalar (timesteps, seconds); dim must be even.
Vec sinusoidal_features(double x, int dim);

uint64_t hash_params(const ParamRefs& refs, ParamGroup group);
long count_params(const ParamRefs& refs, ParamGroup group);

}  // namespace melodit
