#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "duet/ensemble.hpp"
#include "duet/imgops.hpp"
#include "support/generators.hpp"

using namespace duet;

namespace {

// Classifier whose logits are fixed at {fake_logit, 0} regardless of input:
// all conv and dense weights are zero, the Fake dense bias carries the logit.
Classifier fixed_logit(double fake_logit) {
    Rng rng(0);
    Classifier m = Classifier::init({2, 2, 2}, rng);
    for (float& w : m.conv1_w) w = 0.0f;
    for (float& w : m.conv2_w) w = 0.0f;
    for (float& w : m.dense_w) w = 0.0f;
    m.dense_b[kFake] = static_cast<float>(fake_logit);
    m.dense_b[kReal] = 0.0f;
    return m;
}

std::vector<Classifier> random_members(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Classifier> members;
    for (int i = 0; i < count; ++i) members.push_back(Classifier::init({3, 3, 2}, rng));
    return members;
}

} // namespace

TEST_CASE("uniform construction assigns equal weights") {
    const SurrogateEnsemble e = SurrogateEnsemble::uniform(random_members(4, 31));
    REQUIRE(e.size() == 4);
    for (double w : e.weights) CHECK(w == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_NOTHROW(e.validate());
}

TEST_CASE("ensemble validation rejects malformed weight vectors") {
    SurrogateEnsemble e = SurrogateEnsemble::uniform(random_members(2, 32));

    SurrogateEnsemble empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

    SurrogateEnsemble short_weights = e;
    short_weights.weights.pop_back();
    CHECK_THROWS_AS(short_weights.validate(), std::invalid_argument);

    SurrogateEnsemble negative = e;
    negative.weights = {-0.5, 1.5};
    CHECK_THROWS_AS(negative.validate(), std::invalid_argument);

    SurrogateEnsemble off_sum = e;
    off_sum.weights = {0.7, 0.7};
    CHECK_THROWS_AS(off_sum.validate(), std::invalid_argument);
}

TEST_CASE("a single-member ensemble reproduces the member gradient exactly") {
    Rng rng(33);
    const SurrogateEnsemble e = SurrogateEnsemble::uniform(random_members(1, 34));
    const Image x = testgen::random_image(8, 8, rng);
    const Image y = testgen::perturbed(x, 0.05, rng);
    LossConfig cfg;
    cfg.lambda_ssim = 0.3;
    cfg.ssim_window = 3;

    const GradientField ge = ensemble_gradient(e, x, y, cfg);
    const GradientField gm = input_gradient(e.members[0], x, y, cfg);
    REQUIRE(ge.values.size() == gm.values.size());
    for (std::size_t i = 0; i < ge.values.size(); ++i)
        CHECK(ge.values[i] == gm.values[i]);
}

TEST_CASE("uniform ensemble gradient is the mean of member cross-entropy gradients") {
    Rng rng(35);
    const SurrogateEnsemble e = SurrogateEnsemble::uniform(random_members(3, 36));
    const Image x = testgen::random_image(8, 8, rng);
    const Image y = testgen::perturbed(x, 0.05, rng);
    LossConfig cfg;
    cfg.lambda_ssim = 0.3;
    cfg.ssim_window = 3;

    const GradientField ge = ensemble_gradient(e, x, y, cfg);

    LossConfig ce_only = cfg;
    ce_only.lambda_ssim = 0.0;
    std::vector<GradientField> parts;
    for (const Classifier& m : e.members) parts.push_back(input_gradient(m, x, y, ce_only));
    const GradientField gs = ssim_gradient(x, y, cfg.ssim_window);

    for (std::size_t i = 0; i < ge.values.size(); ++i) {
        const double mean_ce = (parts[0].values[i] + parts[1].values[i] + parts[2].values[i]) / 3.0;
        const double expected = mean_ce - cfg.lambda_ssim * gs.values[i];
        CHECK(ge.values[i] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("zero-weight members contribute nothing") {
    Rng rng(37);
    SurrogateEnsemble e = SurrogateEnsemble::uniform(random_members(2, 38));
    e.weights = {1.0, 0.0};
    const Image x = testgen::random_image(8, 8, rng);
    const Image y = testgen::perturbed(x, 0.05, rng);
    LossConfig cfg;
    cfg.lambda_ssim = 0.0;

    const GradientField ge = ensemble_gradient(e, x, y, cfg);
    const GradientField g0 = input_gradient(e.members[0], x, y, cfg);
    for (std::size_t i = 0; i < ge.values.size(); ++i)
        CHECK(ge.values[i] == g0.values[i]);
}

TEST_CASE("adaptive weights form a distribution ordered by residual Fake confidence") {
    SurrogateEnsemble e;
    e.members = {fixed_logit(2.0), fixed_logit(0.0), fixed_logit(-2.0)};
    e.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};

    const Image x(8, 8, 0.5);
    const std::vector<double> w = apw_update(e, x, 0.5);
    REQUIRE(w.size() == 3);

    double sum = 0.0;
    for (double v : w) {
        CHECK(v > 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    // Member 0 is most confidently Fake, so it should dominate.
    CHECK(w[0] > w[1]);
    CHECK(w[1] > w[2]);

    // Exact value check: w_i = softmax(p_i(Fake) / tau).
    const double tau = 0.5;
    double z = 0.0;
    std::array<double, 3> expected{};
    std::array<double, 3> conf{};
    for (int i = 0; i < 3; ++i) {
        const LogitPair p = softmax(forward(e.members[i], x));
        conf[i] = p[kFake];
    }
    const double peak = *std::max_element(conf.begin(), conf.end());
    for (int i = 0; i < 3; ++i) {
        expected[i] = std::exp((conf[i] - peak) / tau);
        z += expected[i];
    }
    for (int i = 0; i < 3; ++i)
        CHECK(w[i] == doctest::Approx(expected[i] / z).epsilon(1e-12));
}

TEST_CASE("low temperature concentrates the adaptive weights") {
    SurrogateEnsemble e;
    e.members = {fixed_logit(1.0), fixed_logit(0.5)};
    e.weights = {0.5, 0.5};
    const Image x(8, 8, 0.5);

    const std::vector<double> warm = apw_update(e, x, 1.0);
    const std::vector<double> cold = apw_update(e, x, 0.01);
    CHECK(cold[0] > warm[0]);
    CHECK(cold[0] > 0.999);

    CHECK_THROWS_AS(apw_update(e, x, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(apw_update(e, x, -1.0), std::invalid_argument);
}
