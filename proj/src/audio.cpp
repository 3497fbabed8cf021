#include "melodit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace melodit {

double Score::end_s() const {
    double e = 0;
    for (const auto& n : notes) e = std::max(e, n.onset_s + n.duration_s);
    return e;
}

const std::vector<std::string>& timbre_names() {
    static const std::vector<std::string> names = {"pure", "pluck", "reed", "bell"};
    return names;
}

const std::array<double, 4>& timbre_profile(const std::string& timbre) {
    static const std::map<std::string, std::array<double, 4>> profiles = {
        {"pure", {1.0, 0.0, 0.0, 0.0}},
        {"pluck", {1.0, 0.5, 0.25, 0.1}},
        {"reed", {1.0, 0.6, 0.3, 0.0}},
        {"bell", {1.0, 0.4, 0.0, 0.2}},
    };
    auto it = profiles.find(timbre);
    if (it == profiles.end()) throw DataError("unknown timbre tag: " + timbre);
    return it->second;
}

const std::vector<std::string>& tag_vocabulary() {
    static const std::vector<std::string> vocab = [] {
        std::vector<std::string> v = timbre_names();
        v.push_back("sparse");
        v.push_back("dense");
        return v;
    }();
    return vocab;
}

// ---------------------------------------------------------------- WAV I/O

namespace {

template <typename T>
T read_le(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open wav file: " + path);

    char riff[4], wave[4];
    in.read(riff, 4);
    read_le<uint32_t>(in);
    in.read(wave, 4);
    if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
        throw DataError("not a RIFF/WAVE file: " + path);

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    std::vector<char> data;
    bool have_fmt = false, have_data = false;

    while (in && !(have_fmt && have_data)) {
        char id[4];
        in.read(id, 4);
        uint32_t size = read_le<uint32_t>(in);
        if (!in) break;
        if (std::memcmp(id, "fmt ", 4) == 0) {
            format = read_le<uint16_t>(in);
            channels = read_le<uint16_t>(in);
            sample_rate = read_le<uint32_t>(in);
            read_le<uint32_t>(in);  // byte rate
            read_le<uint16_t>(in);  // block align
            bits = read_le<uint16_t>(in);
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data.resize(size);
            in.read(data.data(), size);
            have_data = true;
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    if (!have_fmt || !have_data) throw DataError("wav missing fmt/data chunk: " + path);
    if (channels < 1 || channels > 2) throw DataError("wav must have 1 or 2 channels: " + path);

    long frames = 0;
    Eigen::Matrix<double, 2, Eigen::Dynamic> samples;
    if (format == 1 && bits == 16) {
        frames = static_cast<long>(data.size() / (2 * channels));
        samples.resize(2, frames);
        const int16_t* p = reinterpret_cast<const int16_t*>(data.data());
        for (long i = 0; i < frames; i++) {
            double l = p[i * channels] / 32768.0;
            double r = channels == 2 ? p[i * channels + 1] / 32768.0 : l;
            samples(0, i) = l;
            samples(1, i) = r;
        }
    } else if (format == 3 && bits == 32) {
        frames = static_cast<long>(data.size() / (4 * channels));
        samples.resize(2, frames);
        const float* p = reinterpret_cast<const float*>(data.data());
        for (long i = 0; i < frames; i++) {
            double l = p[i * channels];
            double r = channels == 2 ? p[i * channels + 1] : l;
            samples(0, i) = l;
            samples(1, i) = r;
        }
    } else {
        throw DataError("unsupported wav encoding (need 16-bit PCM or 32-bit float): " + path);
    }
    if (frames == 0) throw DataError("zero-length wav: " + path);

    Waveform w;
    w.samples = samples;
    w.sample_rate = static_cast<int>(sample_rate);
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    if (w.length() < 1) throw DataError("refusing to write empty waveform");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write wav file: " + path);

    const uint32_t frames = static_cast<uint32_t>(w.length());
    const uint32_t data_size = frames * 2 * 4;
    out.write("RIFF", 4);
    write_le<uint32_t>(out, 36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_le<uint32_t>(out, 16);
    write_le<uint16_t>(out, 3);  // IEEE float
    write_le<uint16_t>(out, 2);
    write_le<uint32_t>(out, static_cast<uint32_t>(w.sample_rate));
    write_le<uint32_t>(out, static_cast<uint32_t>(w.sample_rate) * 2 * 4);
    write_le<uint16_t>(out, 8);
    write_le<uint16_t>(out, 32);
    out.write("data", 4);
    write_le<uint32_t>(out, data_size);
    for (long i = 0; i < w.length(); i++) {
        write_le<float>(out, static_cast<float>(w.samples(0, i)));
        write_le<float>(out, static_cast<float>(w.samples(1, i)));
    }
    if (!out) throw DataError("short write: " + path);
}

// -------------------------------------------------------------- resampling

Waveform resample(const Waveform& w, int target_sr) {
    if (target_sr < 1000) throw DataError("resample target below 1 kHz");
    if (target_sr == w.sample_rate) return w;

    const long in_len = w.length();
    const long out_len = static_cast<long>(
        std::ceil(static_cast<double>(in_len) * target_sr / w.sample_rate));
    const double ratio = static_cast<double>(w.sample_rate) / target_sr;
    // cutoff at the lower of the two Nyquists
    const double fc = 0.5 * std::min(1.0, 1.0 / ratio);
    const int half_taps = 32;

    Waveform out;
    out.sample_rate = target_sr;
    out.samples.setZero(2, out_len);
    for (long n = 0; n < out_len; n++) {
        const double center = n * ratio;  // position in input samples
        const long lo = static_cast<long>(std::floor(center)) - half_taps + 1;
        const long hi = static_cast<long>(std::floor(center)) + half_taps;
        double acc0 = 0, acc1 = 0;
        for (long m = std::max<long>(lo, 0); m <= std::min<long>(hi, in_len - 1); m++) {
            const double x = center - m;
            // ideal low-pass kernel h(x) = 2*fc*sinc(2*fc*x), Hann-windowed
            double sinc = (x == 0.0) ? 2 * fc : std::sin(2 * M_PI * fc * x) / (M_PI * x);
            const double hw = 0.5 * (1 + std::cos(M_PI * x / half_taps));
            const double coef = sinc * hw;
            acc0 += coef * w.samples(0, m);
            acc1 += coef * w.samples(1, m);
        }
        out.samples(0, n) = acc0;
        out.samples(1, n) = acc1;
    }
    return out;
}

// ---------------------------------------------------------------- synthesis

SynthResult synth_clip(const Score& score, int sr, uint64_t seed) {
    if (score.notes.empty()) throw DataError("synth_clip: empty score");
    const double nyquist = sr / 2.0;
    const long length = static_cast<long>(std::llround(score.end_s() * sr));
    if (length < 1) throw DataError("synth_clip: zero-length score");

    Rng rng(seed);
    const std::string timbre = timbre_names()[rng.uniform_int(static_cast<int>(timbre_names().size()))];
    const auto& profile = timbre_profile(timbre);

    Eigen::Matrix<double, 2, Eigen::Dynamic> buf;
    buf.setZero(2, length);

    const double ramp_s = 0.010;  // >= 5 ms attack/release
    for (const auto& note : score.notes) {
        if (note.midi_note < 0 || note.midi_note > 127) throw DataError("midi note out of range");
        if (note.channel < 0 || note.channel > 1) throw DataError("note channel must be 0 or 1");
        const double f0 = midi_to_hz(note.midi_note);
        if (f0 >= nyquist) throw DataError("note frequency above Nyquist");

        const long start = static_cast<long>(std::llround(note.onset_s * sr));
        const long nsamp = static_cast<long>(std::llround(note.duration_s * sr));
        const long ramp = std::max<long>(1, static_cast<long>(std::llround(ramp_s * sr)));
        std::array<double, 4> phase;
        for (auto& p : phase) p = rng.uniform(0, 2 * M_PI);

        for (long i = 0; i < nsamp && start + i < length; i++) {
            double env = 1.0;
            if (i < ramp) env = static_cast<double>(i) / ramp;
            const long remain = nsamp - 1 - i;
            if (remain < ramp) env = std::min(env, static_cast<double>(remain) / ramp);
            double s = 0;
            for (int h = 0; h < 4; h++) {
                const double fh = f0 * (h + 1);
                if (profile[h] == 0.0 || fh >= nyquist) continue;
                s += profile[h] * std::sin(2 * M_PI * fh * i / sr + phase[h]);
            }
            buf(note.channel, start + i) += note.velocity * env * s;
        }
    }

    const double peak = buf.cwiseAbs().maxCoeff();
    if (peak > 0) buf *= 0.9 / peak;

    const double dur = std::max(score.end_s(), 1e-9);
    const bool dense = static_cast<double>(score.notes.size()) / dur >= 3.0;

    SynthResult res;
    res.audio.samples = buf;
    res.audio.sample_rate = sr;
    res.tags.tags = {timbre, dense ? "dense" : "sparse"};
    return res;
}

Score random_score(double seconds, int min_midi, int max_midi, bool dense, Rng& rng) {
    Score score;
    const int per_second = dense ? 4 : 2;
    const int count = std::max(1, static_cast<int>(std::llround(per_second * seconds)));
    const double slot = seconds / count;
    for (int i = 0; i < count; i++) {
        Note n;
        n.onset_s = i * slot;
        n.duration_s = slot * rng.uniform(0.7, 0.95);
        n.midi_note = min_midi + rng.uniform_int(max_midi - min_midi + 1);
        n.channel = rng.uniform_int(2);
        n.velocity = rng.uniform(0.6, 1.0);
        score.notes.push_back(n);
    }
    // force exact clip length: last note ends at `seconds`
    Note& last = score.notes.back();
    last.duration_s = seconds - last.onset_s;
    return score;
}

// ------------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

void write_score_csv(const std::string& path, const Score& score) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write score: " + path);
    out << "onset_s,duration_s,midi_note,channel,velocity\n";
    for (const auto& n : score.notes) {
        out << format_double(n.onset_s) << "," << format_double(n.duration_s) << ","
            << n.midi_note << "," << n.channel << "," << format_double(n.velocity) << "\n";
    }
}

Score read_score_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open score: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty score file: " + path);
    Score score;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 5) throw DataError("bad score row in " + path + ": " + line);
        Note n;
        n.onset_s = std::stod(f[0]);
        n.duration_s = std::stod(f[1]);
        n.midi_note = std::stoi(f[2]);
        n.channel = std::stoi(f[3]);
        n.velocity = std::stod(f[4]);
        score.notes.push_back(n);
    }
    return score;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << "audio_path,score_path,tags\n";
    for (const auto& r : rows) {
        out << r.audio_path << "," << r.score_path << ",";
        for (size_t i = 0; i < r.tags.size(); i++) {
            if (i) out << ";";
            out << r.tags[i];
        }
        out << "\n";
    }
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty manifest: " + path);
    std::vector<ManifestRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 3) throw DataError("bad manifest row: " + line);
        ManifestRow r;
        r.audio_path = f[0];
        r.score_path = f[1];
        std::stringstream ss(f[2]);
        std::string tag;
        while (std::getline(ss, tag, ';'))
            if (!tag.empty()) r.tags.push_back(tag);
        rows.push_back(r);
    }
    return rows;
}

std::vector<ManifestRow> make_dataset(const DatasetSpec& spec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::vector<ManifestRow> rows;
    Rng rng(spec.seed);
    for (int i = 0; i < spec.count; i++) {
        const double seconds = spec.min_seconds == spec.max_seconds
                                   ? spec.min_seconds
                                   : rng.uniform(spec.min_seconds, spec.max_seconds);
        const bool dense = rng.uniform() < 0.5;
        Score score = random_score(seconds, spec.min_midi, spec.max_midi, dense, rng);
        const uint64_t clip_seed = derive_seed(spec.seed, 0x5eed, static_cast<uint64_t>(i));
        SynthResult synth = synth_clip(score, spec.sample_rate, clip_seed);

        char stem[32];
        std::snprintf(stem, sizeof(stem), "clip_%04d", i);
        const std::string wav_name = std::string(stem) + ".wav";
        const std::string score_name = std::string(stem) + ".score.csv";
        write_wav((fs::path(out_dir) / wav_name).string(), synth.audio);
        write_score_csv((fs::path(out_dir) / score_name).string(), score);

        ManifestRow row;
        row.audio_path = wav_name;
        row.score_path = score_name;
        row.tags = synth.tags.tags;
        rows.push_back(row);
    }
    write_manifest((fs::path(out_dir) / "manifest.csv").string(), rows);
    return rows;
}

}  // namespace melodit
