#ifndef DUET_MODEL_HPP
#define DUET_MODEL_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "duet/image.hpp"
#include "duet/rng.hpp"

namespace duet {

/// Binary label convention used everywhere: class 0 = Fake, class 1 = Real.
enum Label : int { kFake = 0, kReal = 1 };

/// Architecture knobs of the built-in classifier family:
/// conv3x3(3 -> conv1) -> ReLU -> avgpool(pool x pool)
/// -> conv3x3(conv1 -> conv2) -> ReLU -> global avg pool -> dense(conv2 -> 2).
/// Both convolutions are zero-padded "same".
struct ClassifierArch {
    int conv1_channels = 8;
    int conv2_channels = 8;
    int pool = 2;

    void validate() const;
};

/// Small convolutional binary classifier. Parameters are stored as 32-bit
/// floats; all forward/backward arithmetic runs in 64-bit.
struct Classifier {
    ClassifierArch arch;
    std::vector<float> conv1_w; // [c1][3][3][3], ((oc*3+ic)*3+ky)*3+kx
    std::vector<float> conv1_b; // [c1]
    std::vector<float> conv2_w; // [c2][c1][3][3]
    std::vector<float> conv2_b; // [c2]
    std::vector<float> dense_w; // [2][c2]
    std::vector<float> dense_b; // [2]

    /// Xavier-uniform weights, zero biases, deterministic in the rng.
    static Classifier init(const ClassifierArch& arch, Rng& rng);

    /// Minimum input side length the pooling stage supports.
    int min_input_side() const { return arch.pool; }
};

struct LossConfig {
    double lambda_ssim = 0.3;
    int target_label = kReal;
    int ssim_window = 7;
};

using LogitPair = std::array<double, 2>;

LogitPair forward(const Classifier& model, const Image& x);
LogitPair softmax(const LogitPair& logits);

/// argmax prediction; exact logit tie resolves to Fake.
int predict(const Classifier& model, const Image& x);

/// Cross-entropy of the softmax output against the attack target class.
double loss_misclassification(const Classifier& model, const Image& x, int target);

/// loss_misclassification + lambda_ssim * (1 - ssim(x_orig, x_adv, window)).
double total_loss(const Classifier& model, const Image& x_orig, const Image& x_adv, const LossConfig& cfg);

/// Exact analytic gradient of total_loss with respect to x_adv.
GradientField input_gradient(const Classifier& model, const Image& x_orig, const Image& x_adv,
                             const LossConfig& cfg);

/// Non-negative, max-normalized mask (same shape as x). Values are
/// |d loss_misclassification / d x| divided by the maximum, or all-zero when
/// the gradient vanishes identically.
using SaliencyMask = GradientField;
SaliencyMask saliency_map(const Classifier& model, const Image& x, int target);

struct TrainSample {
    Image image;
    int label = kFake;
};

struct TrainHyper {
    double learning_rate = 0.05;
    int epochs = 20;
    int batch_size = 16;
    std::uint64_t seed = 0;
};

struct TrainResult {
    Classifier model;
    double final_accuracy = 0.0;
};

/// Minibatch SGD (classical momentum 0.9) on cross-entropy toward the true
/// label. Deterministic given
/// hyper.seed; epochs = 0 returns the seed-determined initialization.
/// Throws std::invalid_argument when the dataset does not contain both classes.
TrainResult train_detector(const std::vector<TrainSample>& dataset, const ClassifierArch& arch,
                           const TrainHyper& hyper);

double accuracy(const Classifier& model, const std::vector<TrainSample>& dataset);

// Serialization: versioned binary layout: magic, version, architecture
// descriptor, then parameter arrays as little-endian 32-bit floats.

struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelTruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void save_model(const Classifier& model, const std::string& path);
Classifier load_model(const std::string& path);

} // namespace duet

#endif // DUET_MODEL_HPP
