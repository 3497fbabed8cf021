#include "melodit/codec.hpp"

namespace melodit {

LatentSeq codec_encode(const Waveform& w, int patch) {
    if (patch < 1) throw DataError("codec patch must be >= 1");
    const long L = w.length();
    const long n = latent_length(L, patch);
    const double scale = 1.0 / std::sqrt(static_cast<double>(patch));

    LatentSeq out;
    out.sample_rate = w.sample_rate;
    out.patch = patch;
    out.orig_len = L;
    out.z.setZero(n, 2L * patch);
    for (long i = 0; i < n; i++) {
        for (int j = 0; j < patch; j++) {
            const long s = i * patch + j;
            if (s >= L) break;  // zero padding
            out.z(i, 2 * j) = w.samples(0, s) * scale;
            out.z(i, 2 * j + 1) = w.samples(1, s) * scale;
        }
    }
    return out;
}

Waveform codec_decode(const LatentSeq& z) {
    if (z.patch < 1 || z.sample_rate < 1) throw DataError("latent sequence missing codec metadata");
    if (z.dim() != 2L * z.patch) throw DataError("latent dim does not match patch size");
    const long padded = z.length() * z.patch;
    const long L = z.orig_len > 0 ? std::min(z.orig_len, padded) : padded;
    const double scale = std::sqrt(static_cast<double>(z.patch));

    Waveform w;
    w.sample_rate = z.sample_rate;
    w.samples.setZero(2, L);
    for (long i = 0; i < z.length(); i++) {
        for (int j = 0; j < z.patch; j++) {
            const long s = i * z.patch + j;
            if (s >= L) break;
            w.samples(0, s) = z.z(i, 2 * j) * scale;
            w.samples(1, s) = z.z(i, 2 * j + 1) * scale;
        }
    }
    return w;
}

}  // namespace melodit
