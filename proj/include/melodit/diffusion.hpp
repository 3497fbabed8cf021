#pragma once

#include "melodit/curriculum.hpp"
#include "melodit/model.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>

namespace melodit {

// cosine schedule: alpha = cos(0.5*pi*t), sigma = sin(0.5*pi*t)
struct NoisePoint {
    double t = 0, alpha = 1, sigma = 0;
};

inline NoisePoint noise_point(double t) {
    return {t, std::cos(0.5 * M_PI * t), std::sin(0.5 * M_PI * t)};
}

Mat q_sample(const Mat& x0, double t, const Mat& eps);
Mat v_target(const Mat& x0, const Mat& eps, double t);
// x0 = alpha*x_t - sigma*v ; eps = sigma*x_t + alpha*v
Mat recover_x0(const Mat& x_t, const Mat& v, double t);
Mat recover_eps(const Mat& x_t, const Mat& v, double t);

Mat cfg_combine(const Mat& v_cond, const Mat& v_uncond, double s);

struct SamplerConfig {
    enum class Method { ddim, dpmpp2m };
    int steps = 250;
    double cfg_scale = 7.0;
    Method method = Method::dpmpp2m;
    uint64_t seed = 0;

    static Method parse_method(const std::string& s);
};

// v-prediction denoiser; CFG (if any) happens inside the closure.
using VModel = std::function<Mat(const Mat& x, double t)>;

Mat sample_ddim(const VModel& model, const SamplerConfig& cfg, long rows, long cols);
Mat sample_dpmpp2m(const VModel& model, const SamplerConfig& cfg, long rows, long cols);
Mat sample_latents(const VModel& model, const SamplerConfig& cfg, long rows, long cols);

// ----------------------------------------------------------------- training

struct TrainItem {
    Mat x0;  // latents in diffusion space (already divided by latent_scale)
    MelodyPrompt prompt;
    TagSet tags;
    TimingSpec timing;
    long orig_len = 0;
};

struct Dataset {
    std::vector<TrainItem> items;
    double latent_scale = 1.0;
    int sample_rate = 0;
    int patch = 0;
    int hop = 0;
};

Dataset load_dataset(const std::string& manifest_path, const RunConfig& rc);

struct AdamW {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::map<std::string, std::pair<Mat, Mat>> moments;

    void update(const ParamRefs& refs, const FreezeFlags& freeze, double lr, double weight_decay,
                long adam_step);
};

inline double inverse_lr(double base_lr, long step, double gamma) {
    return base_lr * std::pow(1.0 + static_cast<double>(step) / gamma, -0.5);
}

struct TrainState {
    ModelParams model;
    AdamW opt;
    long step = 0;
    double base_lr = 5e-5;
    double gamma = 10000;
    double weight_decay = 1e-4;
    double text_drop_prob = 0.1;
    int batch = 4;
    uint64_t seed = 0;
    double latent_scale = 1.0;
};

struct StepInfo {
    double loss = 0;
    double lr = 0;
    int mask_phase = 0;      // -1 warm, 0..2 post-warm
    MaskClass mask_class = MaskClass::full;  // class drawn for slot 0
};

// One optimizer step over a deterministic batch derived from (seed, step).
StepInfo train_step(TrainState& state, const Dataset& data, const MaskSchedule& schedule);

// Mean v-objective loss over the whole dataset at a fixed (t, eps) grid with
// all-MASK prompts; used to compare masking curricula.
double masked_validation_loss(const TrainState& state, const Dataset& data, int t_points,
                              uint64_t seed);

// ---------------------------------------------------------------- inference

struct GenerateSettings {
    int sample_rate = 16000;
    int patch = 64;
    int hop = 64;
    bool use_control = true;
};

Waveform generate(const TrainState& state, const TagSet& tags, const TimingSpec& timing,
                  const std::optional<MelodyPrompt>& melody, const SamplerConfig& scfg,
                  const GenerateSettings& gs);

}  // namespace melodit
