#include "melodit/cqt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

namespace melodit {

MelodyPrompt MelodyPrompt::all_mask(int frames, double frame_rate) {
    MelodyPrompt p;
    p.pitches.setConstant(8, frames, kMaskToken);
    p.frame_rate = frame_rate;
    return p;
}

Waveform highpass_biquad(const Waveform& w, double cutoff_hz) {
    const double nyquist = w.sample_rate / 2.0;
    if (cutoff_hz <= 0 || cutoff_hz >= nyquist) throw DataError("highpass cutoff out of range");

    // RBJ cookbook high-pass, Q = 1/sqrt(2) (Butterworth)
    const double w0 = 2 * M_PI * cutoff_hz / w.sample_rate;
    const double kq = M_SQRT1_2;  // Butterworth Q
    const double alpha = std::sin(w0) / (2.0 * kq);
    const double cw = std::cos(w0);
    const double a0 = 1 + alpha;
    const double b0 = (1 + cw) / 2 / a0;
    const double b1 = -(1 + cw) / a0;
    const double b2 = (1 + cw) / 2 / a0;
    const double a1 = -2 * cw / a0;
    const double a2 = (1 - alpha) / a0;

    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.resize(2, w.length());
    for (int ch = 0; ch < 2; ch++) {
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
        for (long i = 0; i < w.length(); i++) {
            const double x = w.samples(ch, i);
            const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            out.samples(ch, i) = y;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
        }
    }
    return out;
}

CqtGram cqt(const Waveform& w, int hop) {
    if (hop < 1) throw DataError("cqt hop must be >= 1");
    const long L = w.length();
    const int sr = w.sample_rate;
    const double nyquist = sr / 2.0;
    const double q_factor = 1.0 / (std::pow(2.0, 1.0 / 12.0) - 1.0);

    // shortest active kernel must fit in the clip
    int highest_active = -1;
    for (int b = 0; b < kCqtBins; b++)
        if (cqt_bin_hz(b) < nyquist) highest_active = b;
    if (highest_active < 0) throw DataError("cqt: no bins below Nyquist");
    const long shortest = static_cast<long>(std::ceil(q_factor * sr / cqt_bin_hz(highest_active)));
    if (L < shortest) throw DataError("cqt: clip shorter than the analysis kernel");

    // kernel bank: Hann-windowed complex exponentials, normalized by window sum
    struct Kernel {
        Vec kcos, ksin;
        long len = 0;
    };
    std::vector<Kernel> bank(kCqtBins);
    for (int b = 0; b < kCqtBins; b++) {
        const double fb = cqt_bin_hz(b);
        if (fb >= nyquist) continue;  // stays empty -> zero output
        const long n = std::min<long>(static_cast<long>(std::ceil(q_factor * sr / fb)), L);
        Kernel& k = bank[b];
        k.len = n;
        k.kcos.resize(n);
        k.ksin.resize(n);
        const double center = (n - 1) / 2.0;
        double wsum = 0;
        for (long m = 0; m < n; m++) {
            const double win = (n == 1) ? 1.0 : 0.5 * (1 - std::cos(2 * M_PI * m / (n - 1)));
            const double ph = 2 * M_PI * fb * (m - center) / sr;
            k.kcos[m] = win * std::cos(ph);
            k.ksin[m] = win * std::sin(ph);
            wsum += win;
        }
        k.kcos /= wsum;
        k.ksin /= wsum;
    }

    const int frames = static_cast<int>((L + hop - 1) / hop);
    CqtGram gram;
    gram.frame_rate = static_cast<double>(sr) / hop;
    for (int ch = 0; ch < 2; ch++) {
        gram.mag[ch].setZero(kCqtBins, frames);
        const Vec x = w.samples.row(ch).transpose();
        for (int f = 0; f < frames; f++) {
            const long fc = static_cast<long>(f) * hop;
            for (int b = 0; b < kCqtBins; b++) {
                const Kernel& k = bank[b];
                if (k.len == 0) continue;
                const long start = fc - (k.len - 1) / 2;
                const long lo = std::max<long>(start, 0);
                const long hi = std::min<long>(start + k.len, L);
                if (lo >= hi) continue;
                const long klo = lo - start;
                const long n = hi - lo;
                const double re = k.kcos.segment(klo, n).dot(x.segment(lo, n));
                const double im = k.ksin.segment(klo, n).dot(x.segment(lo, n));
                gram.mag[ch](b, f) = std::sqrt(re * re + im * im);
            }
        }
    }
    return gram;
}

MelodyPrompt topk_select(const CqtGram& gram, int k, double silence_rel) {
    if (k < 1 || k > kCqtBins) throw DataError("topk_select: k out of range");
    if (2 * k != 8) throw DataError("topk_select: downstream prompt expects k = 4");
    const int frames = gram.frames();

    double max_energy = 0;
    Eigen::MatrixXd energy(2, frames);
    for (int ch = 0; ch < 2; ch++) {
        for (int f = 0; f < frames; f++) {
            energy(ch, f) = gram.mag[ch].col(f).squaredNorm();
            max_energy = std::max(max_energy, energy(ch, f));
        }
    }
    const double energy_thresh = silence_rel * max_energy;
    const double mag_thresh = std::sqrt(energy_thresh);

    MelodyPrompt prompt = MelodyPrompt::all_mask(frames, gram.frame_rate);
    std::vector<int> order(kCqtBins);
    for (int f = 0; f < frames; f++) {
        for (int ch = 0; ch < 2; ch++) {
            if (energy(ch, f) < energy_thresh || max_energy == 0) continue;
            std::iota(order.begin(), order.end(), 0);
            const auto& col = gram.mag[ch].col(f);
            // descending magnitude, ties toward the lower bin index
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return col(a) > col(b); });
            for (int s = 0; s < k; s++) {
                const int bin = order[s];
                if (col(bin) < mag_thresh || col(bin) == 0.0) continue;
                prompt.pitches(2 * s + ch, f) = bin + 1;
            }
        }
    }
    return prompt;
}

MelodyPrompt prompt_from_score(const Score& score, double frame_rate, int frames, int* dropped) {
    for (const auto& n : score.notes)
        if (n.midi_note < 0 || n.midi_note > 127) throw DataError("score midi note out of range");

    MelodyPrompt prompt = MelodyPrompt::all_mask(frames, frame_rate);
    std::set<size_t> dropped_notes;
    for (int f = 0; f < frames; f++) {
        const double t = f / frame_rate;
        for (int ch = 0; ch < 2; ch++) {
            // (velocity desc, score order) determines slot assignment
            std::vector<size_t> active;
            for (size_t i = 0; i < score.notes.size(); i++) {
                const auto& n = score.notes[i];
                if (n.channel == ch && n.onset_s <= t && t < n.onset_s + n.duration_s)
                    active.push_back(i);
            }
            std::stable_sort(active.begin(), active.end(), [&](size_t a, size_t b) {
                return score.notes[a].velocity > score.notes[b].velocity;
            });
            for (size_t s = 0; s < active.size(); s++) {
                if (s >= 4) {
                    dropped_notes.insert(active[s]);
                    continue;
                }
                prompt.pitches(2 * static_cast<int>(s) + ch, f) = score.notes[active[s]].midi_note + 1;
            }
        }
    }
    if (dropped) *dropped = static_cast<int>(dropped_notes.size());
    return prompt;
}

void write_prompt_csv(const std::string& path, const MelodyPrompt& prompt) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write prompt csv: " + path);
    out << "L1,R1,L2,R2,L3,R3,L4,R4\n";
    for (int f = 0; f < prompt.frames(); f++) {
        for (int r = 0; r < 8; r++) {
            if (r) out << ",";
            out << prompt.pitches(r, f);
        }
        out << "\n";
    }
}

MelodyPrompt read_prompt_csv(const std::string& path, double frame_rate) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open prompt csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty prompt csv: " + path);
    std::vector<std::array<int, 8>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::array<int, 8> vals{};
        std::stringstream ss(line);
        std::string item;
        int i = 0;
        while (std::getline(ss, item, ',') && i < 8) vals[i++] = std::stoi(item);
        if (i != 8) throw DataError("bad prompt row: " + line);
        for (int v : vals)
            if (v < 0 || v > 128) throw DataError("prompt value out of range: " + line);
        rows.push_back(vals);
    }
    MelodyPrompt prompt = MelodyPrompt::all_mask(static_cast<int>(rows.size()), frame_rate);
    for (size_t f = 0; f < rows.size(); f++)
        for (int r = 0; r < 8; r++) prompt.pitches(r, static_cast<int>(f)) = rows[f][r];
    return prompt;
}

MelodyPrompt extract_prompt(const Waveform& w, const FrontendConfig& fc) {
    return topk_select(cqt(highpass_biquad(w, fc.cutoff_hz), fc.hop), fc.k, fc.silence_rel);
}

}  // namespace melodit
