#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "duet/imgops.hpp"
#include "duet/model.hpp"
#include "support/generators.hpp"

using namespace duet;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

Classifier zeroed(const ClassifierArch& arch) {
    Rng rng(0);
    Classifier m = Classifier::init(arch, rng);
    for (float& w : m.conv1_w) w = 0.0f;
    for (float& w : m.conv2_w) w = 0.0f;
    for (float& w : m.dense_w) w = 0.0f;
    return m;
}

// Identity-ish classifier: conv stages pass the red channel through their
// center taps, so the logits are an affine map of the mean red intensity.
Classifier red_probe() {
    ClassifierArch arch{1, 1, 2};
    Classifier m = zeroed(arch);
    m.conv1_w[(0 * 3 + 0) * 9 + 4] = 1.0f; // center tap, input channel 0
    m.conv1_b[0] = 0.5f;
    m.conv2_w[4] = 1.0f;
    m.dense_w[0] = 2.0f;  // Fake logit
    m.dense_w[1] = -1.0f; // Real logit
    m.dense_b[0] = 0.1f;
    m.dense_b[1] = -0.1f;
    return m;
}

} // namespace

TEST_CASE("architecture validation") {
    CHECK_NOTHROW((ClassifierArch{8, 8, 2}.validate()));
    CHECK_THROWS_AS((ClassifierArch{0, 8, 2}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ClassifierArch{8, 0, 2}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ClassifierArch{8, 8, 0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ClassifierArch{4096, 8, 2}.validate()), std::invalid_argument);
}

TEST_CASE("initialization is seed-deterministic with zero biases and bounded weights") {
    const ClassifierArch arch{6, 4, 2};
    Rng r1(21), r2(21);
    const Classifier a = Classifier::init(arch, r1);
    const Classifier b = Classifier::init(arch, r2);
    CHECK(a.conv1_w == b.conv1_w);
    CHECK(a.conv2_w == b.conv2_w);
    CHECK(a.dense_w == b.dense_w);

    for (float v : a.conv1_b) CHECK(v == 0.0f);
    for (float v : a.conv2_b) CHECK(v == 0.0f);
    for (float v : a.dense_b) CHECK(v == 0.0f);

    const double bound1 = std::sqrt(6.0 / (3 * 9 + arch.conv1_channels * 9));
    for (float v : a.conv1_w) CHECK(std::abs(v) <= bound1 + 1e-7);
    const double bound_d = std::sqrt(6.0 / (arch.conv2_channels + 2));
    for (float v : a.dense_w) CHECK(std::abs(v) <= bound_d + 1e-7);
}

TEST_CASE("forward pass of a hand-built constant network") {
    const Classifier m = red_probe();
    const Image x(4, 4, 0.2);
    const LogitPair logits = forward(m, x);
    // red 0.2 -> conv1 0.7 -> pool 0.7 -> conv2 0.7 -> gap 0.7
    // Parameters are stored as 32-bit floats, so agreement is float-precision.
    CHECK(logits[kFake] == doctest::Approx(2.0 * 0.7 + 0.1).epsilon(1e-6));
    CHECK(logits[kReal] == doctest::Approx(-1.0 * 0.7 - 0.1).epsilon(1e-6));
    CHECK(predict(m, x) == kFake);

    const LogitPair p = softmax(logits);
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[kFake] > p[kReal]);
}

TEST_CASE("prediction ties break toward Fake") {
    const Classifier m = zeroed({2, 2, 2});
    CHECK(predict(m, Image(4, 4, 0.7)) == kFake);
}

TEST_CASE("forward rejects images smaller than the pooling stage") {
    Rng rng(3);
    const Classifier m = Classifier::init({4, 4, 4}, rng);
    CHECK_THROWS_AS(forward(m, Image(3, 8, 0.5)), std::invalid_argument);
    CHECK_NOTHROW(forward(m, Image(4, 4, 0.5)));
}

TEST_CASE("misclassification loss is the target's negative log-probability") {
    const Classifier m = red_probe();
    const Image x(4, 4, 0.2);
    const LogitPair p = softmax(forward(m, x));
    CHECK(loss_misclassification(m, x, kReal) ==
          doctest::Approx(-std::log(p[kReal])).epsilon(1e-12));
    CHECK(loss_misclassification(m, x, kReal) > 0.0);
}

TEST_CASE("total loss decomposes into cross-entropy plus weighted dissimilarity") {
    Rng rng(22);
    const Classifier m = Classifier::init({4, 4, 2}, rng);
    const Image x = testgen::random_image(8, 8, rng);
    const Image y = testgen::perturbed(x, 0.1, rng);
    LossConfig cfg;
    cfg.lambda_ssim = 0.3;
    cfg.ssim_window = 3;
    const double expected =
        loss_misclassification(m, y, kReal) + 0.3 * (1.0 - ssim(x, y, 3));
    CHECK(total_loss(m, x, y, cfg) == doctest::Approx(expected).epsilon(1e-12));

    // At the unperturbed point the similarity term vanishes exactly.
    CHECK(total_loss(m, x, x, cfg) == loss_misclassification(m, x, kReal));
}

TEST_CASE("analytic input gradient matches finite differences of the total loss") {
    Rng rng(23);
    const Classifier m = Classifier::init({3, 3, 2}, rng);
    const Image x_orig = testgen::random_image(6, 6, rng);
    Image x = testgen::perturbed(x_orig, 0.1, rng);
    LossConfig cfg;
    cfg.lambda_ssim = 0.3;
    cfg.ssim_window = 3;

    const GradientField g = input_gradient(m, x_orig, x, cfg);
    const double h = 1e-5;
    int bad = 0, total = 0;
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        const double saved = x.pixels[i];
        x.pixels[i] = saved + h;
        const double up = total_loss(m, x_orig, x, cfg);
        x.pixels[i] = saved - h;
        const double down = total_loss(m, x_orig, x, cfg);
        x.pixels[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(g.values[i]), 1e-10});
        if (std::abs(fd - g.values[i]) / denom > 1e-4 &&
            std::abs(fd - g.values[i]) > 1e-9) {
            ++bad;
        }
        ++total;
    }
    // ReLU kinks can spoil a handful of coordinates.
    CHECK(bad <= total / 100);
}

TEST_CASE("saliency maps are normalized absolute gradients") {
    Rng rng(24);
    const Classifier m = Classifier::init({4, 4, 2}, rng);
    const Image x = testgen::random_image(8, 8, rng);
    const SaliencyMask mask = saliency_map(m, x, kReal);
    double peak = 0.0;
    for (double v : mask.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        peak = std::max(peak, v);
    }
    CHECK(peak == 1.0);

    const SaliencyMask flat = saliency_map(zeroed({2, 2, 2}), x, kReal);
    for (double v : flat.values) CHECK(v == 0.0);
}

TEST_CASE("training requires both classes and sane hyperparameters") {
    Rng rng(25);
    std::vector<TrainSample> fakes_only;
    for (int i = 0; i < 4; ++i) fakes_only.push_back({testgen::random_image(8, 8, rng), kFake});
    TrainHyper hyper;
    CHECK_THROWS_AS(train_detector(fakes_only, {4, 4, 2}, hyper), std::invalid_argument);

    std::vector<TrainSample> both = fakes_only;
    both.push_back({testgen::random_image(8, 8, rng), kReal});
    TrainHyper bad = hyper;
    bad.batch_size = 0;
    CHECK_THROWS_AS(train_detector(both, {4, 4, 2}, bad), std::invalid_argument);
    bad = hyper;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(train_detector(both, {4, 4, 2}, bad), std::invalid_argument);
}

TEST_CASE("zero-epoch training returns the seeded initialization") {
    Rng rng(26);
    std::vector<TrainSample> data;
    for (int i = 0; i < 3; ++i) {
        data.push_back({testgen::random_image(8, 8, rng), kFake});
        data.push_back({testgen::random_image(8, 8, rng), kReal});
    }
    TrainHyper hyper;
    hyper.epochs = 0;
    hyper.seed = 99;
    const TrainResult r = train_detector(data, {4, 4, 2}, hyper);

    Rng init_rng(99);
    const Classifier fresh = Classifier::init({4, 4, 2}, init_rng);
    CHECK(r.model.conv1_w == fresh.conv1_w);
    CHECK(r.model.dense_w == fresh.dense_w);
}

TEST_CASE("training is deterministic and separates an easy dataset") {
    Rng rng(27);
    std::vector<TrainSample> data;
    for (int i = 0; i < 8; ++i) {
        Image bright(8, 8, 0.0);
        for (double& p : bright.pixels) p = rng.uniform(0.6, 0.9);
        Image dark(8, 8, 0.0);
        for (double& p : dark.pixels) p = rng.uniform(0.1, 0.4);
        data.push_back({std::move(bright), kReal});
        data.push_back({std::move(dark), kFake});
    }
    TrainHyper hyper;
    hyper.epochs = 30;
    hyper.learning_rate = 0.1;
    hyper.batch_size = 4;
    hyper.seed = 7;
    const TrainResult a = train_detector(data, {4, 4, 2}, hyper);
    const TrainResult b = train_detector(data, {4, 4, 2}, hyper);
    CHECK(a.model.conv1_w == b.model.conv1_w);
    CHECK(a.model.conv2_w == b.model.conv2_w);
    CHECK(a.model.dense_w == b.model.dense_w);
    CHECK(a.final_accuracy == b.final_accuracy);

    CHECK(a.final_accuracy == accuracy(a.model, data));
    CHECK(a.final_accuracy >= 0.9);
}

TEST_CASE("model files round-trip bit-exactly") {
    Rng rng(28);
    const Classifier m = Classifier::init({5, 3, 2}, rng);
    const auto path = temp_file("duet_model_roundtrip.bin");
    save_model(m, path.string());
    const Classifier back = load_model(path.string());
    CHECK(back.arch.conv1_channels == 5);
    CHECK(back.arch.conv2_channels == 3);
    CHECK(back.arch.pool == 2);
    CHECK(back.conv1_w == m.conv1_w);
    CHECK(back.conv1_b == m.conv1_b);
    CHECK(back.conv2_w == m.conv2_w);
    CHECK(back.conv2_b == m.conv2_b);
    CHECK(back.dense_w == m.dense_w);
    CHECK(back.dense_b == m.dense_b);
    std::filesystem::remove(path);
}

TEST_CASE("model loading distinguishes format, version, and truncation failures") {
    Rng rng(29);
    const Classifier m = Classifier::init({2, 2, 2}, rng);
    const auto path = temp_file("duet_model_corrupt.bin");
    save_model(m, path.string());

    std::string bytes;
    {
        std::ifstream f(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }

    auto rewrite = [&](const std::string& data) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(data.data(), static_cast<std::streamsize>(data.size()));
    };

    std::string wrong_magic = bytes;
    wrong_magic[0] = 'X';
    rewrite(wrong_magic);
    CHECK_THROWS_AS(load_model(path.string()), ModelFormatError);

    std::string wrong_version = bytes;
    wrong_version[8] = 99; // little-endian version word
    rewrite(wrong_version);
    CHECK_THROWS_AS(load_model(path.string()), ModelVersionError);

    rewrite(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_model(path.string()), ModelTruncationError);

    rewrite(bytes + "xx");
    CHECK_THROWS_AS(load_model(path.string()), ModelFormatError);

    rewrite(bytes);
    CHECK_NOTHROW(load_model(path.string()));
    std::filesystem::remove(path);

    CHECK_THROWS(load_model("/nonexistent/model.bin"));
}
