#pragma once

#include "melodit/cqt.hpp"
#include "melodit/nn.hpp"

#include <vector>

namespace melodit {

// Pitch embeddings (vocabulary 129, index 0 = MASK) followed by strided 1D
// convolutions mapping the prompt frame rate to the latent rate.
struct MelodyEncoderParams {
    int embed_dim = 16;
    EmbeddingTable embed;       // [129 x E]
    std::vector<Conv1d> convs;  // SiLU between layers, linear final layer

    void setup(int e_dim, int hidden, int d_model, const std::vector<int>& kernels,
               const std::vector<int>& strides, uint64_t seed);
    long stride_product() const;
    void collect(ParamRefs& out);
};

struct MelodyTrace {
    std::vector<int> flat_ids;  // frame-major, 8 ids per frame
    Mat framewise;              // [F x 8E]
    std::vector<Conv1d::Cache> conv_caches;
    std::vector<Mat> conv_pre;  // per layer pre-activation output
    long raw_len = 0;           // conv output length before reconciliation
    long target_len = 0;
};

// Per frame, the 8 row embeddings concatenated in row order -> [F x 8E].
Mat embed_prompt(const MelodyPrompt& prompt, const MelodyEncoderParams& params,
                 std::vector<int>* flat_ids = nullptr);

// Strided conv stack over the framewise embedding; output truncated or
// right-zero-padded to target_len. Errors when |raw - target| > 1.
Mat downsample(const Mat& framewise, const MelodyEncoderParams& params, long target_len,
               MelodyTrace* trace);

Mat encode_melody(const MelodyEncoderParams& params, const MelodyPrompt& prompt,
                  long target_len, MelodyTrace* trace);

// Routes d(ControlSeq) back into embeddings and convolutions.
void melody_backward(MelodyEncoderParams& params, const MelodyTrace& trace, const Mat& dctrl);

}  // namespace melodit
