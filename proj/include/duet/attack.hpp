#ifndef DUET_ATTACK_HPP
#define DUET_ATTACK_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "duet/ensemble.hpp"
#include "duet/image.hpp"
#include "duet/imgops.hpp"
#include "duet/rng.hpp"

namespace duet {

/// When the photometric/noise pass runs relative to the attack loop.
/// After/Both re-project the preprocessed result into the epsilon ball so the
/// budget invariant survives.
enum class PreprocessPlacement { Before, After, Both, Off };

struct PreprocessConfig {
    double contrast = 0.9;
    double brightness = 0.0;
    int perlin_grid_cells = 8;
    double perlin_amplitude = 2.0 / 255.0;
    PreprocessPlacement placement = PreprocessPlacement::Before;

    bool identity() const {
        return contrast == 1.0 && brightness == 0.0 && perlin_amplitude == 0.0;
    }
};

struct AttackConfig {
    std::optional<double> alpha;  // step size; unset = max(epsilon/8, 1/255)
    int iterations = 20;          // T
    double mu = 1.0;              // momentum decay
    int ti_kernel_size = 5;       // translation-invariance smoothing kernel
    double ti_sigma = 1.5;
    double di_probability = 0.5;  // input-diversity transform probability
    double di_scale_min = 0.8;
    double di_scale_max = 1.0;
    double lambda_ssim = 0.3;
    int ssim_window = 7;
    std::optional<double> epsilon; // fixed budget; unset = epsilon search
    std::uint64_t seed = 0;

    bool apw_enabled = true;
    bool apw_every_iteration = true;
    double apw_temperature = 0.5;
    std::optional<int> sg_surrogate_index; // unset = APW-heaviest after the MNTD run

    // Epsilon-search grid, scaled by clamp(pixel_variance / variance_ref, ...).
    std::vector<double> epsilon_grid = {2.0 / 255, 4.0 / 255, 6.0 / 255, 8.0 / 255,
                                        12.0 / 255, 16.0 / 255, 24.0 / 255, 32.0 / 255};
    int bisection_steps = 5;
    double variance_ref = 0.05;
    double variance_scale_min = 0.5;
    double variance_scale_max = 2.0;

    double resolve_alpha(double epsilon) const;
    void validate() const;
};

/// Momentum accumulator. g holds the applied (descent-on-targeted-loss)
/// direction; t counts completed steps.
struct MomentumState {
    GradientField g;
    int t = 0;

    static MomentumState zero(int height, int width) { return {GradientField(height, width), 0}; }
};

enum class Stream { MntdPgd, SgPgd };
const char* stream_name(Stream s);

struct AdversarialCandidate {
    Image image;
    GradientField delta;          // image minus the attack baseline
    double epsilon_used = 0.0;
    Stream stream = Stream::MntdPgd;
    double ssim_to_original = 0.0; // against the caller-supplied original
    std::vector<bool> surrogate_fooled;
};

/// Invoked with each post-step iterate (and the post-attack preprocessed
/// image when placement is After/Both).
using IterateObserver = std::function<void(const Image&)>;

/// Photometric adjustment followed by Perlin noise, clamped to [0, 1].
Image preprocess(const Image& x, const PreprocessConfig& cfg, Rng& rng);

struct MntdStepResult {
    Image image;
    MomentumState state;
};

/// One MNTD-PGD iteration: Nesterov look-ahead, input diversity, APW-weighted
/// ensemble gradient of the total loss, translation-invariance smoothing,
/// L1-normalized momentum accumulation, signed step, projection.
MntdStepResult mntd_step(const Image& x_orig, const Image& x_adv, const MomentumState& state,
                         const SurrogateEnsemble& ensemble, const AttackConfig& cfg, double epsilon,
                         Rng& rng);

/// Full MNTD-PGD attack at a fixed budget. Preprocessing runs once per the
/// configured placement; APW weights refresh per config. ssim_to_original and
/// delta use the caller's x and the post-preprocessing baseline respectively.
AdversarialCandidate mntd_pgd_attack(const Image& x, const SurrogateEnsemble& ensemble,
                                     const AttackConfig& cfg, double epsilon,
                                     const PreprocessConfig& pre_cfg,
                                     std::vector<double>* final_apw_weights = nullptr,
                                     const IterateObserver& observer = {});

/// Saliency-gated PGD on a single surrogate: static mask from x, pure
/// misclassification loss, no preprocessing.
AdversarialCandidate sg_pgd_attack(const Image& x, const Classifier& model, const AttackConfig& cfg,
                                   double epsilon, const IterateObserver& observer = {});

struct EpsilonSearchSettings {
    std::vector<double> grid; // ascending, non-empty
    int bisection_steps = 5;
    double variance_ref = 0.05;
    double scale_min = 0.5;
    double scale_max = 2.0;
};

struct EpsilonProbe {
    double epsilon = 0.0;
    bool success = false;
};

struct EpsilonSearchResult {
    double epsilon = 0.0;
    bool succeeded = false;
    std::vector<EpsilonProbe> trace;
};

/// Coarse-to-fine minimal-budget search. The grid is scaled by
/// clamp(pixel_variance(x) / variance_ref, scale_min, scale_max), probed in
/// ascending order until the first success, then refined by binary search
/// between the last failure and first success, re-invoking attack_succeeds at
/// each midpoint. Returns the smallest epsilon observed to succeed, or the
/// largest scaled grid value with succeeded = false.
EpsilonSearchResult epsilon_search(const Image& x, const std::function<bool(double)>& attack_succeeds,
                                   const EpsilonSearchSettings& settings);

struct DualStreamResult {
    AdversarialCandidate mntd;
    AdversarialCandidate sg;
    std::optional<EpsilonSearchResult> search; // present when no fixed epsilon is set
};

/// Stage-1 entry point: one MNTD-PGD candidate (epsilon-searched unless the
/// config pins a budget) and one SG-PGD candidate at the same budget.
/// Both candidates carry fooled bits for every ensemble member.
DualStreamResult run_dual_stream(const Image& x, const SurrogateEnsemble& ensemble,
                                 const AttackConfig& cfg, const PreprocessConfig& pre_cfg);

} // namespace duet

#endif // DUET_ATTACK_HPP
