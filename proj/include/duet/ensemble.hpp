#ifndef DUET_ENSEMBLE_HPP
#define DUET_ENSEMBLE_HPP

#include <vector>

#include "duet/image.hpp"
#include "duet/model.hpp"

namespace duet {

/// Ordered set of surrogate classifiers with adaptive per-surrogate weights.
/// Weights are non-negative and sum to 1.
struct SurrogateEnsemble {
    std::vector<Classifier> members;
    std::vector<double> weights;

    static SurrogateEnsemble uniform(std::vector<Classifier> members);

    std::size_t size() const { return members.size(); }
    void validate() const;
};

/// Weighted sum over members of the total-loss input gradient. The SSIM term
/// is model-independent, so it is added once (weights sum to 1).
GradientField ensemble_gradient(const SurrogateEnsemble& ensemble, const Image& x_orig,
                                const Image& x_adv, const LossConfig& cfg);

/// New weights w_i proportional to exp(p_i(Fake) / temperature), where
/// p_i(Fake) is member i's softmax confidence that x_adv is still Fake.
/// Harder-to-fool surrogates receive more gradient weight.
std::vector<double> apw_update(const SurrogateEnsemble& ensemble, const Image& x_adv,
                               double temperature);

} // namespace duet

#endif // DUET_ENSEMBLE_HPP
