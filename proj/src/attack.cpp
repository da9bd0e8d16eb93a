#include "duet/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "duet/model.hpp"

namespace duet {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

bool placement_before(PreprocessPlacement p) {
    return p == PreprocessPlacement::Before || p == PreprocessPlacement::Both;
}

bool placement_after(PreprocessPlacement p) {
    return p == PreprocessPlacement::After || p == PreprocessPlacement::Both;
}

std::vector<bool> fooled_bits(const SurrogateEnsemble& ensemble, const Image& x) {
    std::vector<bool> bits(ensemble.members.size());
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
        bits[i] = predict(ensemble.members[i], x) == kReal;
    }
    return bits;
}

int heaviest_weight_index(const std::vector<double>& weights) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(weights.size()); ++i) {
        if (weights[i] > weights[best]) best = i;
    }
    return best;
}

} // namespace

const char* stream_name(Stream s) {
    return s == Stream::MntdPgd ? "mntd_pgd" : "sg_pgd";
}

double AttackConfig::resolve_alpha(double epsilon) const {
    if (alpha) return *alpha;
    return std::max(epsilon / 8.0, 1.0 / 255.0);
}

void AttackConfig::validate() const {
    if (alpha && *alpha <= 0.0) throw std::invalid_argument("attack: alpha must be positive");
    if (iterations < 1) throw std::invalid_argument("attack: iterations must be at least 1");
    if (mu < 0.0) throw std::invalid_argument("attack: mu must be non-negative");
    if (ti_kernel_size < 1 || ti_kernel_size % 2 == 0) {
        throw std::invalid_argument("attack: ti_kernel_size must be odd and positive");
    }
    if (ti_sigma <= 0.0) throw std::invalid_argument("attack: ti_sigma must be positive");
    if (di_probability < 0.0 || di_probability > 1.0) {
        throw std::invalid_argument("attack: di_probability must lie in [0, 1]");
    }
    if (di_scale_min <= 0.0 || di_scale_min > di_scale_max || di_scale_max > 1.0) {
        throw std::invalid_argument("attack: diversity scale range must satisfy 0 < min <= max <= 1");
    }
    if (lambda_ssim < 0.0) throw std::invalid_argument("attack: lambda_ssim must be non-negative");
    if (ssim_window < 1 || ssim_window % 2 == 0) {
        throw std::invalid_argument("attack: ssim_window must be odd and positive");
    }
    if (epsilon && *epsilon <= 0.0) throw std::invalid_argument("attack: epsilon must be positive");
    if (apw_temperature <= 0.0) throw std::invalid_argument("attack: apw_temperature must be positive");
    if (epsilon_grid.empty()) throw std::invalid_argument("attack: epsilon_grid must be non-empty");
    for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
        if (epsilon_grid[i] <= 0.0 || (i > 0 && epsilon_grid[i] <= epsilon_grid[i - 1])) {
            throw std::invalid_argument("attack: epsilon_grid must be positive and strictly ascending");
        }
    }
    if (bisection_steps < 0) throw std::invalid_argument("attack: bisection_steps must be non-negative");
    if (variance_ref <= 0.0) throw std::invalid_argument("attack: variance_ref must be positive");
    if (variance_scale_min <= 0.0 || variance_scale_min > variance_scale_max) {
        throw std::invalid_argument("attack: variance scale range is invalid");
    }
}

Image preprocess(const Image& x, const PreprocessConfig& cfg, Rng& rng) {
    if (cfg.perlin_grid_cells < 1) {
        throw std::invalid_argument("preprocess: perlin_grid_cells must be positive");
    }
    if (cfg.perlin_amplitude < 0.0) {
        throw std::invalid_argument("preprocess: perlin_amplitude must be non-negative");
    }
    Image out = adjust_photometric(x, cfg.contrast, cfg.brightness);
    if (cfg.perlin_amplitude != 0.0) {
        GradientField noise =
            perlin_noise(x.height, x.width, cfg.perlin_grid_cells, cfg.perlin_amplitude, rng);
        for (std::size_t i = 0; i < out.pixels.size(); ++i) {
            out.pixels[i] = std::clamp(out.pixels[i] + noise.values[i], 0.0, 1.0);
        }
    }
    return out;
}

MntdStepResult mntd_step(const Image& x_orig, const Image& x_adv, const MomentumState& state,
                         const SurrogateEnsemble& ensemble, const AttackConfig& cfg, double epsilon,
                         Rng& rng) {
    if (!x_orig.same_shape(x_adv)) throw std::invalid_argument("mntd_step: shape mismatch");
    const double alpha = cfg.resolve_alpha(epsilon);
    const std::size_t n = x_adv.pixels.size();

    Image x_hat = x_adv;
    if (cfg.mu != 0.0 && state.t > 0) {
        for (std::size_t i = 0; i < n; ++i) {
            x_hat.pixels[i] = x_adv.pixels[i] + alpha * cfg.mu * sgn(state.g.values[i]);
        }
        x_hat = project_linf(x_orig, x_hat, epsilon);
    }

    Image x_div =
        input_diversity(x_hat, cfg.di_probability, cfg.di_scale_min, cfg.di_scale_max, rng);

    LossConfig loss;
    loss.lambda_ssim = cfg.lambda_ssim;
    loss.target_label = kReal;
    loss.ssim_window = cfg.ssim_window;
    GradientField grad = ensemble_gradient(ensemble, x_orig, x_div, loss);

    // Applied direction: the loss is targeted, so the step descends.
    GradientField d(x_adv.height, x_adv.width);
    for (std::size_t i = 0; i < n; ++i) d.values[i] = -grad.values[i];
    if (cfg.ti_kernel_size > 1) {
        d = convolve_same(d, gaussian_kernel(cfg.ti_kernel_size, cfg.ti_sigma));
    }
    const double norm = l1_norm(d);
    if (norm > 0.0) {
        for (std::size_t i = 0; i < n; ++i) d.values[i] /= norm;
    }

    MntdStepResult out;
    out.state.g = GradientField(x_adv.height, x_adv.width);
    for (std::size_t i = 0; i < n; ++i) {
        out.state.g.values[i] = cfg.mu * state.g.values[i] + d.values[i];
    }
    out.state.t = state.t + 1;

    Image stepped(x_adv.height, x_adv.width);
    for (std::size_t i = 0; i < n; ++i) {
        stepped.pixels[i] = x_adv.pixels[i] + alpha * sgn(out.state.g.values[i]);
    }
    out.image = project_linf(x_orig, stepped, epsilon);
    return out;
}

AdversarialCandidate mntd_pgd_attack(const Image& x, const SurrogateEnsemble& ensemble,
                                     const AttackConfig& cfg, double epsilon,
                                     const PreprocessConfig& pre_cfg,
                                     std::vector<double>* final_apw_weights,
                                     const IterateObserver& observer) {
    cfg.validate();
    ensemble.validate();
    x.validate();
    if (epsilon < 0.0) throw std::invalid_argument("mntd_pgd_attack: epsilon must be non-negative");

    Rng rng(cfg.seed);
    Image x_base = placement_before(pre_cfg.placement) ? preprocess(x, pre_cfg, rng) : x;

    SurrogateEnsemble ens = ensemble;
    Image x_adv = x_base;
    MomentumState state = MomentumState::zero(x.height, x.width);
    for (int t = 0; t < cfg.iterations; ++t) {
        if (cfg.apw_enabled && (cfg.apw_every_iteration || t == 0)) {
            ens.weights = apw_update(ens, x_adv, cfg.apw_temperature);
        }
        MntdStepResult r = mntd_step(x_base, x_adv, state, ens, cfg, epsilon, rng);
        x_adv = std::move(r.image);
        state = std::move(r.state);
        if (observer) observer(x_adv);
    }
    if (placement_after(pre_cfg.placement)) {
        x_adv = project_linf(x_base, preprocess(x_adv, pre_cfg, rng), epsilon);
        if (observer) observer(x_adv);
    }
    if (final_apw_weights) *final_apw_weights = ens.weights;

    AdversarialCandidate cand;
    cand.delta = subtract(x_adv, x_base);
    cand.epsilon_used = epsilon;
    cand.stream = Stream::MntdPgd;
    cand.ssim_to_original = ssim(x, x_adv, cfg.ssim_window);
    cand.surrogate_fooled = fooled_bits(ens, x_adv);
    cand.image = std::move(x_adv);
    return cand;
}

AdversarialCandidate sg_pgd_attack(const Image& x, const Classifier& model, const AttackConfig& cfg,
                                   double epsilon, const IterateObserver& observer) {
    cfg.validate();
    x.validate();
    if (epsilon < 0.0) throw std::invalid_argument("sg_pgd_attack: epsilon must be non-negative");

    const double alpha = cfg.resolve_alpha(epsilon);
    const std::size_t n = x.pixels.size();
    const SaliencyMask mask = saliency_map(model, x, kReal);

    LossConfig ce_only;
    ce_only.lambda_ssim = 0.0;
    ce_only.target_label = kReal;
    ce_only.ssim_window = cfg.ssim_window;

    Image x_adv = x;
    Image stepped(x.height, x.width);
    for (int t = 0; t < cfg.iterations; ++t) {
        GradientField grad = input_gradient(model, x, x_adv, ce_only);
        for (std::size_t i = 0; i < n; ++i) {
            stepped.pixels[i] = x_adv.pixels[i] + alpha * sgn(-grad.values[i]) * mask.values[i];
        }
        x_adv = project_linf(x, stepped, epsilon);
        if (observer) observer(x_adv);
    }

    AdversarialCandidate cand;
    cand.delta = subtract(x_adv, x);
    cand.epsilon_used = epsilon;
    cand.stream = Stream::SgPgd;
    cand.ssim_to_original = ssim(x, x_adv, cfg.ssim_window);
    cand.surrogate_fooled = {predict(model, x_adv) == kReal};
    cand.image = std::move(x_adv);
    return cand;
}

EpsilonSearchResult epsilon_search(const Image& x, const std::function<bool(double)>& attack_succeeds,
                                   const EpsilonSearchSettings& settings) {
    if (!attack_succeeds) throw std::invalid_argument("epsilon_search: missing attack predicate");
    if (settings.grid.empty()) throw std::invalid_argument("epsilon_search: grid must be non-empty");
    for (std::size_t i = 0; i < settings.grid.size(); ++i) {
        if (settings.grid[i] <= 0.0 || (i > 0 && settings.grid[i] <= settings.grid[i - 1])) {
            throw std::invalid_argument("epsilon_search: grid must be positive and strictly ascending");
        }
    }
    if (settings.bisection_steps < 0) {
        throw std::invalid_argument("epsilon_search: bisection_steps must be non-negative");
    }
    if (settings.variance_ref <= 0.0) {
        throw std::invalid_argument("epsilon_search: variance_ref must be positive");
    }
    if (settings.scale_min <= 0.0 || settings.scale_min > settings.scale_max) {
        throw std::invalid_argument("epsilon_search: scale range is invalid");
    }

    const double scale = std::clamp(pixel_variance(x) / settings.variance_ref, settings.scale_min,
                                    settings.scale_max);

    EpsilonSearchResult result;
    auto probe = [&](double eps) {
        const bool ok = attack_succeeds(eps);
        result.trace.push_back({eps, ok});
        return ok;
    };

    int first_success = -1;
    for (std::size_t i = 0; i < settings.grid.size(); ++i) {
        if (probe(settings.grid[i] * scale)) {
            first_success = static_cast<int>(i);
            break;
        }
    }
    if (first_success < 0) {
        result.epsilon = settings.grid.back() * scale;
        result.succeeded = false;
        return result;
    }
    if (first_success == 0) {
        result.epsilon = settings.grid.front() * scale;
        result.succeeded = true;
        return result;
    }

    double lo = settings.grid[first_success - 1] * scale; // largest known failure
    double hi = settings.grid[first_success] * scale;     // smallest known success
    for (int b = 0; b < settings.bisection_steps; ++b) {
        const double mid = 0.5 * (lo + hi);
        if (probe(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    result.epsilon = hi;
    result.succeeded = true;
    return result;
}

DualStreamResult run_dual_stream(const Image& x, const SurrogateEnsemble& ensemble,
                                 const AttackConfig& cfg, const PreprocessConfig& pre_cfg) {
    cfg.validate();
    ensemble.validate();

    struct CachedRun {
        double epsilon;
        AdversarialCandidate cand;
        std::vector<double> weights;
    };
    std::optional<CachedRun> last_success;
    std::optional<CachedRun> last_probe;

    DualStreamResult result;
    double epsilon = 0.0;
    if (cfg.epsilon) {
        epsilon = *cfg.epsilon;
    } else {
        EpsilonSearchSettings settings;
        settings.grid = cfg.epsilon_grid;
        settings.bisection_steps = cfg.bisection_steps;
        settings.variance_ref = cfg.variance_ref;
        settings.scale_min = cfg.variance_scale_min;
        settings.scale_max = cfg.variance_scale_max;
        auto fools_all = [&](double eps) {
            std::vector<double> weights;
            AdversarialCandidate cand = mntd_pgd_attack(x, ensemble, cfg, eps, pre_cfg, &weights);
            const bool ok = std::all_of(cand.surrogate_fooled.begin(), cand.surrogate_fooled.end(),
                                        [](bool b) { return b; });
            last_probe = CachedRun{eps, cand, weights};
            if (ok) last_success = std::move(*last_probe);
            return ok;
        };
        result.search = epsilon_search(x, fools_all, settings);
        epsilon = result.search->epsilon;
    }

    std::vector<double> apw_weights;
    if (last_success && last_success->epsilon == epsilon) {
        result.mntd = std::move(last_success->cand);
        apw_weights = std::move(last_success->weights);
    } else if (last_probe && last_probe->epsilon == epsilon) {
        result.mntd = std::move(last_probe->cand);
        apw_weights = std::move(last_probe->weights);
    } else {
        result.mntd = mntd_pgd_attack(x, ensemble, cfg, epsilon, pre_cfg, &apw_weights);
    }

    int sg_index = cfg.sg_surrogate_index.value_or(heaviest_weight_index(apw_weights));
    if (sg_index < 0 || sg_index >= static_cast<int>(ensemble.members.size())) {
        throw std::invalid_argument("run_dual_stream: sg surrogate index out of range");
    }
    result.sg = sg_pgd_attack(x, ensemble.members[sg_index], cfg, epsilon);
    result.sg.surrogate_fooled = fooled_bits(ensemble, result.sg.image);
    return result;
}

} // namespace duet
