#pragma once

#include "melodit/audio.hpp"
#include "melodit/common.hpp"

namespace melodit {

// Exactly invertible patchify codec: one latent vector per patch of D stereo
// frames, interleaved (L,R) and scaled by 1/sqrt(D). d_lat = 2*D.
struct LatentSeq {
    Mat z;  // [L_latent x 2*patch]
    int sample_rate = 0;
    int patch = 0;
    long orig_len = 0;  // waveform length before padding

    long length() const { return z.rows(); }
    long dim() const { return z.cols(); }
};

LatentSeq codec_encode(const Waveform& w, int patch);
Waveform codec_decode(const LatentSeq& z);

inline long latent_length(long samples, int patch) {
    return (samples + patch - 1) / patch;
}

}  // namespace melodit
