#include "duet/ensemble.hpp"

#include <cmath>
#include <stdexcept>

#include "duet/imgops.hpp"

namespace duet {

SurrogateEnsemble SurrogateEnsemble::uniform(std::vector<Classifier> members) {
    if (members.empty()) throw std::invalid_argument("SurrogateEnsemble: needs at least one member");
    SurrogateEnsemble e;
    e.weights.assign(members.size(), 1.0 / static_cast<double>(members.size()));
    e.members = std::move(members);
    return e;
}

void SurrogateEnsemble::validate() const {
    if (members.empty()) throw std::invalid_argument("SurrogateEnsemble: empty");
    if (weights.size() != members.size())
        throw std::invalid_argument("SurrogateEnsemble: weight/member count mismatch");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("SurrogateEnsemble: negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("SurrogateEnsemble: weights must sum to 1");
}

GradientField ensemble_gradient(const SurrogateEnsemble& ensemble, const Image& x_orig,
                                const Image& x_adv, const LossConfig& cfg) {
    ensemble.validate();
    LossConfig ce_only = cfg;
    ce_only.lambda_ssim = 0.0;

    GradientField total(x_adv.height, x_adv.width);
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
        const double w = ensemble.weights[i];
        if (w == 0.0) continue;
        const GradientField g = input_gradient(ensemble.members[i], x_orig, x_adv, ce_only);
        if (w == 1.0) {
            for (std::size_t j = 0; j < total.values.size(); ++j) total.values[j] += g.values[j];
        } else {
            for (std::size_t j = 0; j < total.values.size(); ++j) total.values[j] += w * g.values[j];
        }
    }
    if (cfg.lambda_ssim != 0.0) {
        const GradientField gs = ssim_gradient(x_orig, x_adv, cfg.ssim_window);
        for (std::size_t j = 0; j < total.values.size(); ++j)
            total.values[j] -= cfg.lambda_ssim * gs.values[j];
    }
    return total;
}

std::vector<double> apw_update(const SurrogateEnsemble& ensemble, const Image& x_adv,
                               double temperature) {
    if (ensemble.members.empty()) throw std::invalid_argument("apw_update: empty ensemble");
    if (!(temperature > 0.0)) throw std::invalid_argument("apw_update: temperature must be positive");
    std::vector<double> conf(ensemble.members.size());
    double max_arg = -1.0;
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
        conf[i] = softmax(forward(ensemble.members[i], x_adv))[kFake] / temperature;
        max_arg = std::max(max_arg, conf[i]);
    }
    double z = 0.0;
    std::vector<double> w(conf.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(conf[i] - max_arg);
        z += w[i];
    }
    for (double& v : w) v /= z;
    return w;
}

} // namespace duet
