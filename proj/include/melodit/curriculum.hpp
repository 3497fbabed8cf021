#pragma once

#include "melodit/cqt.hpp"
#include "melodit/rng.hpp"

#include <array>
#include <vector>

namespace melodit {

// Mask configuration classes over the top-1..4 row groups (L/R pairs atomic):
// all rows masked / only top-1 kept / top-1 plus one of 2..4 / plus two / full.
enum class MaskClass { all_mask = 0, top1_only = 1, top1_one = 2, top1_two = 3, full = 4 };

constexpr int kMaskClasses = 5;

// rows masked out of 8 for each class
constexpr std::array<int, kMaskClasses> kClassRowsMasked = {8, 6, 4, 2, 0};

struct MaskConfig {
    MaskClass cls = MaskClass::full;
    bool mask_everything = false;           // warm phase: all rows, all frames
    std::array<bool, 3> group_masked{};     // top-2..4 row groups
    std::array<int, 3> slot_source{0, 1, 2};  // shuffle: slot s carries group slot_source[s]
    std::vector<std::pair<int, int>> frame_spans;  // [start,end) masked across all rows
};

struct MaskSchedule {
    long total_steps = 0;
    long warm_steps = 0;                              // all-mask phase
    std::array<long, 3> phase_end{};                  // step thresholds (exclusive)
    std::array<std::array<double, kMaskClasses>, 3> weights{};
    double frame_mask_prob = 0.1;
    double span_mean_frames = 8.0;
    bool enabled = true;  // disabled = always-full prompts (ablation)

    static MaskSchedule from_fractions(long total_steps, double warm_frac,
                                       const std::array<std::array<double, kMaskClasses>, 3>& w,
                                       double frame_mask_prob, double span_mean_frames,
                                       bool enabled = true);
    int phase_of(long step) const;  // -1 = warm, 0..2 post-warm
    const std::array<double, kMaskClasses>& weights_at(long step) const;
};

MaskConfig sample_mask_config(const MaskSchedule& schedule, long step, Rng& rng, int frames);

MelodyPrompt apply_mask(const MelodyPrompt& prompt, const MaskConfig& config);

// P(rows_masked <= m) for m = 0..8 under the row-direction distribution.
std::array<double, 9> schedule_cdf(const MaskSchedule& schedule, long step);

}  // namespace melodit
