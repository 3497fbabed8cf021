#include "melodit/curriculum.hpp"

#include <algorithm>
#include <cmath>

namespace melodit {

MaskSchedule MaskSchedule::from_fractions(long total_steps, double warm_frac,
                                          const std::array<std::array<double, kMaskClasses>, 3>& w,
                                          double frame_mask_prob, double span_mean_frames,
                                          bool enabled) {
    if (total_steps < 1) throw DataError("mask schedule needs total_steps >= 1");
    MaskSchedule s;
    s.total_steps = total_steps;
    s.warm_steps = static_cast<long>(std::llround(warm_frac * total_steps));
    const long rest = total_steps - s.warm_steps;
    s.phase_end[0] = s.warm_steps + rest / 3;
    s.phase_end[1] = s.warm_steps + 2 * rest / 3;
    s.phase_end[2] = total_steps;
    s.weights = w;
    for (const auto& phase : w) {
        double sum = 0;
        for (double x : phase) {
            if (x < 0) throw DataError("mask weights must be non-negative");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw DataError("mask weights must sum to 1");
    }
    s.frame_mask_prob = frame_mask_prob;
    s.span_mean_frames = span_mean_frames;
    s.enabled = enabled;
    return s;
}

int MaskSchedule::phase_of(long step) const {
    if (step < warm_steps) return -1;
    if (step < phase_end[0]) return 0;
    if (step < phase_end[1]) return 1;
    return 2;
}

const std::array<double, kMaskClasses>& MaskSchedule::weights_at(long step) const {
    const int p = phase_of(step);
    return weights[p < 0 ? 0 : p];
}

namespace {

MaskClass draw_class(const std::array<double, kMaskClasses>& w, Rng& rng) {
    double u = rng.uniform();
    double acc = 0;
    for (int c = 0; c < kMaskClasses; c++) {
        acc += w[c];
        if (u < acc) return static_cast<MaskClass>(c);
    }
    return MaskClass::full;
}

}  // namespace

MaskConfig sample_mask_config(const MaskSchedule& schedule, long step, Rng& rng, int frames) {
    MaskConfig cfg;
    if (!schedule.enabled) {
        cfg.cls = MaskClass::full;
        return cfg;
    }
    if (step < schedule.warm_steps) {
        cfg.cls = MaskClass::all_mask;
        cfg.mask_everything = true;
        cfg.group_masked = {true, true, true};
        return cfg;
    }

    cfg.cls = draw_class(schedule.weights_at(step), rng);
    switch (cfg.cls) {
        case MaskClass::all_mask:
            cfg.mask_everything = true;
            cfg.group_masked = {true, true, true};
            break;
        case MaskClass::top1_only:
            cfg.group_masked = {true, true, true};
            break;
        case MaskClass::top1_one: {  // one surviving group of top-2..4
            const int keep = rng.uniform_int(3);
            cfg.group_masked = {true, true, true};
            cfg.group_masked[keep] = false;
            break;
        }
        case MaskClass::top1_two: {  // one masked group
            const int drop = rng.uniform_int(3);
            cfg.group_masked = {false, false, false};
            cfg.group_masked[drop] = true;
            break;
        }
        case MaskClass::full:
            cfg.group_masked = {false, false, false};
            break;
    }

    if (!cfg.mask_everything) {
        // uniform shuffle of the top-2..4 group slots (Fisher-Yates)
        cfg.slot_source = {0, 1, 2};
        for (int i = 2; i > 0; i--) {
            const int j = rng.uniform_int(i + 1);
            std::swap(cfg.slot_source[i], cfg.slot_source[j]);
        }
        // frame spans: geometric lengths, start probability tuned so the
        // marginal masked fraction is ~frame_mask_prob
        const double p_start = schedule.span_mean_frames > 0
                                   ? schedule.frame_mask_prob / schedule.span_mean_frames
                                   : 0.0;
        const double p_continue = schedule.span_mean_frames > 1
                                      ? 1.0 - 1.0 / schedule.span_mean_frames
                                      : 0.0;
        int f = 0;
        while (f < frames) {
            if (rng.uniform() < p_start) {
                int end = f + 1;
                while (end < frames && rng.uniform() < p_continue) end++;
                cfg.frame_spans.emplace_back(f, end);
                f = end;
            } else {
                f++;
            }
        }
    }
    return cfg;
}

MelodyPrompt apply_mask(const MelodyPrompt& prompt, const MaskConfig& config) {
    MelodyPrompt out = prompt;
    if (config.mask_everything) {
        out.pitches.setConstant(kMaskToken);
        return out;
    }

    // mask row groups, then shuffle the three top-2..4 group slots;
    // top-1 rows (0,1) are never touched
    std::array<Eigen::Matrix<int, 2, Eigen::Dynamic>, 3> groups;
    for (int g = 0; g < 3; g++) {
        if (config.group_masked[g]) {
            groups[g].setConstant(2, prompt.frames(), kMaskToken);
        } else {
            groups[g] = prompt.pitches.middleRows(2 * (g + 1), 2);
        }
    }
    for (int s = 0; s < 3; s++)
        out.pitches.middleRows(2 * (s + 1), 2) = groups[config.slot_source[s]];

    for (const auto& [start, end] : config.frame_spans) {
        for (int f = std::max(start, 0); f < std::min<int>(end, prompt.frames()); f++)
            out.pitches.col(f).setConstant(kMaskToken);
    }
    return out;
}

std::array<double, 9> schedule_cdf(const MaskSchedule& schedule, long step) {
    std::array<double, 9> pmf{};
    if (!schedule.enabled) {
        pmf[0] = 1.0;
    } else if (step < schedule.warm_steps) {
        pmf[8] = 1.0;
    } else {
        const auto& w = schedule.weights_at(step);
        for (int c = 0; c < kMaskClasses; c++) pmf[kClassRowsMasked[c]] += w[c];
    }
    std::array<double, 9> cdf{};
    double acc = 0;
    for (int m = 0; m <= 8; m++) {
        acc += pmf[m];
        cdf[m] = acc;
    }
    return cdf;
}

}  // namespace melodit
