#pragma once

#include "melodit/audio.hpp"
#include "melodit/common.hpp"

#include <array>
#include <string>

namespace melodit {

constexpr int kCqtBins = 128;
// exact MIDI 0; bin b <-> MIDI note b
constexpr double kCqtFmin = 8.175798915643707;
constexpr int kMaskToken = 0;

inline double cqt_bin_hz(int bin) { return kCqtFmin * std::pow(2.0, bin / 12.0); }

// Magnitude constant-Q transform per channel: mag[ch] is [128 bins x F frames].
struct CqtGram {
    std::array<Mat, 2> mag;
    double frame_rate = 0;  // sample_rate / hop
    int frames() const { return static_cast<int>(mag[0].cols()); }
};

// 8 x F integer matrix; rows (L1,R1,L2,R2,L3,R3,L4,R4); values 0..128 where
// 0 is the MASK token and 1..128 are pitch indices (index = bin + 1 = MIDI + 1).
struct MelodyPrompt {
    Eigen::Matrix<int, 8, Eigen::Dynamic> pitches;
    double frame_rate = 0;
    int frames() const { return static_cast<int>(pitches.cols()); }

    static MelodyPrompt all_mask(int frames, double frame_rate);
};

// Second-order Butterworth high-pass (RBJ biquad, Q = 1/sqrt(2)), zero state.
Waveform highpass_biquad(const Waveform& w, double cutoff_hz);

// Direct windowed complex kernel bank: Q = 1/(2^(1/12)-1), Hann window,
// kernel length min(ceil(Q*sr/f_b), L); frame n centered at sample n*hop.
// Bins at or above Nyquist are all-zero.
CqtGram cqt(const Waveform& w, int hop = 512);

// Per channel and frame, the k most prominent bins (descending magnitude,
// ties broken toward the lower bin), interleaved L/R. Frames whose channel
// energy is below silence_rel * max frame energy emit MASK in that channel.
MelodyPrompt topk_select(const CqtGram& gram, int k = 4, double silence_rel = 1e-6);

// Frame-sampled score: active notes per channel sorted by velocity descending
// fill the top-1..4 rows. More than 4 simultaneous notes per channel keeps the
// 4 loudest; *dropped reports the number discarded.
MelodyPrompt prompt_from_score(const Score& score, double frame_rate, int frames,
                               int* dropped = nullptr);

void write_prompt_csv(const std::string& path, const MelodyPrompt& prompt);
MelodyPrompt read_prompt_csv(const std::string& path, double frame_rate);

// Frontend settings shared by prompt extraction and the evaluation metric.
struct FrontendConfig {
    double cutoff_hz = 261.6255653005986;
    int hop = 512;
    int k = 4;
    double silence_rel = 1e-6;
};

MelodyPrompt extract_prompt(const Waveform& w, const FrontendConfig& fc);

}  // namespace melodit
