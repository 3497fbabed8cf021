#pragma once

#include "melodit/common.hpp"
#include "melodit/rng.hpp"

#include <array>
#include <string>
#include <vector>

namespace melodit {

// Stereo waveform, samples in [-1,1]. Row 0 = left, row 1 = right.
struct Waveform {
    Eigen::Matrix<double, 2, Eigen::Dynamic> samples;
    int sample_rate = 0;

    long length() const { return samples.cols(); }
    double seconds() const { return static_cast<double>(length()) / sample_rate; }
};

struct Note {
    double onset_s = 0;
    double duration_s = 0;
    int midi_note = 0;
    int channel = 0;  // 0 = left, 1 = right
    double velocity = 1.0;
};

struct Score {
    std::vector<Note> notes;
    double end_s() const;
};

struct TagSet {
    std::vector<std::string> tags;
};

// Closed tag vocabulary: timbre names plus density classes.
const std::vector<std::string>& tag_vocabulary();
// Relative amplitudes of harmonics 1..4 for a timbre tag.
const std::array<double, 4>& timbre_profile(const std::string& timbre);
const std::vector<std::string>& timbre_names();

Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// Band-limited (windowed-sinc) resampling; output length ceil(L*target/sr).
Waveform resample(const Waveform& w, int target_sr);

struct SynthResult {
    Waveform audio;
    TagSet tags;
};

// Additive harmonic rendering of a score. Deterministic per seed (seed picks
// timbre and per-note phases). Peak-normalized to 0.9.
SynthResult synth_clip(const Score& score, int sr, uint64_t seed);

struct DatasetSpec {
    int count = 32;
    double min_seconds = 2.0;
    double max_seconds = 2.0;
    int sample_rate = 16000;
    int min_midi = 60;
    int max_midi = 83;
    uint64_t seed = 0;
};

struct ManifestRow {
    std::string audio_path;
    std::string score_path;
    std::vector<std::string> tags;
};

// Writes WAVs, score CSVs, and manifest.csv under out_dir; returns the rows.
std::vector<ManifestRow> make_dataset(const DatasetSpec& spec, const std::string& out_dir);

Score read_score_csv(const std::string& path);
void write_score_csv(const std::string& path, const Score& score);
std::vector<ManifestRow> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);

// Random score with sparse/dense note density classes; used by make_dataset.
Score random_score(double seconds, int min_midi, int max_midi, bool dense, Rng& rng);

}  // namespace melodit
