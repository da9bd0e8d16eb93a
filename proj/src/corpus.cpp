#include "duet/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "duet/io.hpp"
#include "duet/rng.hpp"

namespace duet {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Key space for per-image child streams: real and fake images must never
// share a stream even when their indices collide.
constexpr std::uint64_t kFakeKeyBase = 0x100000000ULL;

/// Smooth color field: per-channel base level plus two oriented cosine waves
/// with per-channel gains. All frequencies stay at or below 1.2 cycles per
/// image side, so a 3x3 kernel sees these as locally near-constant and the
/// band gap to the artifact scale stays open.
Image smooth_field(int size, Rng& rng) {
    double base[kChannels];
    for (double& b : base) b = rng.uniform(0.48, 0.52);

    constexpr int kWaves = 2;
    double gain[kWaves][kChannels];
    double freq[kWaves];
    double dir_x[kWaves];
    double dir_y[kWaves];
    double phase[kWaves];
    for (int w = 0; w < kWaves; ++w) {
        const double amp = rng.uniform(0.02, 0.06);
        for (double& g : gain[w]) g = amp * rng.uniform(-1.0, 1.0);
        freq[w] = rng.uniform(0.4, 1.2);
        const double theta = rng.uniform(0.0, kTwoPi);
        dir_x[w] = std::cos(theta);
        dir_y[w] = std::sin(theta);
        phase[w] = rng.uniform(0.0, kTwoPi);
    }

    Image img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            for (int c = 0; c < kChannels; ++c) {
                double v = base[c];
                for (int w = 0; w < kWaves; ++w) {
                    const double t = (x * dir_x[w] + y * dir_y[w]) / size;
                    v += gain[w][c] * std::cos(kTwoPi * freq[w] * t + phase[w]);
                }
                img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return img;
}

long long band_index(double t, int cell) {
    return static_cast<long long>(std::floor(t / cell));
}

/// Adds a high-frequency artifact over the whole image: the square-wave
/// patterns carry their energy at the cell scale (4-5 px), above the field's
/// 1.5 cycles per side yet coarse enough that a 3x3 convolution and a
/// smoothed gradient both resolve it. Amplitudes leave the faintest fakes
/// near the decision boundary a detector learns from this corpus.
void add_artifact(Image& img, Rng& rng) {
    const int kind = static_cast<int>(rng.uniform_int(3));
    const int cell = 4 + static_cast<int>(rng.uniform_int(2));
    const double amp = rng.uniform(0.10, 0.18);
    const double cx = rng.uniform(0.3, 0.7) * img.width;
    const double cy = rng.uniform(0.3, 0.7) * img.height;
    const double theta = rng.uniform(0.0, kTwoPi);
    const double dx = std::cos(theta);
    const double dy = std::sin(theta);

    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            long long band = 0;
            switch (kind) {
            case 0: // checkerboard
                band = band_index(x, cell) + band_index(y, cell);
                break;
            case 1: // concentric rings
                band = band_index(std::hypot(x - cx, y - cy), cell);
                break;
            default: // stripes
                band = band_index(x * dx + y * dy, cell);
                break;
            }
            const double s = (band & 1LL) ? -amp : amp;
            for (int c = 0; c < kChannels; ++c) {
                img.at(y, x, c) = std::clamp(img.at(y, x, c) + s, 0.0, 1.0);
            }
        }
    }
}

std::string indexed_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d.png", i);
    return buf;
}

} // namespace

LabeledCorpus synthesize_corpus(int n_real, int n_fake, int size, std::uint64_t seed) {
    if (n_real < 1 || n_fake < 1) {
        throw std::invalid_argument("synthesize_corpus: need at least one image per class");
    }
    if (size < 16) throw std::invalid_argument("synthesize_corpus: size must be at least 16");

    const Rng master(seed);
    LabeledCorpus corpus;
    corpus.real.reserve(n_real);
    corpus.fake.reserve(n_fake);
    for (int i = 0; i < n_real; ++i) {
        Rng rng = master.child(static_cast<std::uint64_t>(i));
        corpus.real.push_back(smooth_field(size, rng));
    }
    for (int i = 0; i < n_fake; ++i) {
        Rng rng = master.child(kFakeKeyBase + static_cast<std::uint64_t>(i));
        Image img = smooth_field(size, rng);
        add_artifact(img, rng);
        corpus.fake.push_back(std::move(img));
    }
    return corpus;
}

void save_corpus(const LabeledCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "real");
    std::filesystem::create_directories(dir / "fake");
    for (std::size_t i = 0; i < corpus.real.size(); ++i) {
        save_png(corpus.real[i], (dir / "real" / indexed_name(static_cast<int>(i))).string());
    }
    for (std::size_t i = 0; i < corpus.fake.size(); ++i) {
        save_png(corpus.fake[i], (dir / "fake" / indexed_name(static_cast<int>(i))).string());
    }
}

std::vector<NamedImage> load_image_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("load_image_dir: not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    std::vector<NamedImage> out;
    out.reserve(paths.size());
    for (const auto& p : paths) {
        out.push_back({p.stem().string(), load_png(p.string())});
    }
    return out;
}

LabeledCorpus load_corpus(const std::filesystem::path& dir) {
    LabeledCorpus corpus;
    for (auto& named : load_image_dir(dir / "real")) corpus.real.push_back(std::move(named.image));
    for (auto& named : load_image_dir(dir / "fake")) corpus.fake.push_back(std::move(named.image));
    return corpus;
}

std::vector<TrainSample> corpus_samples(const LabeledCorpus& corpus) {
    std::vector<TrainSample> samples;
    samples.reserve(corpus.real.size() + corpus.fake.size());
    for (const Image& img : corpus.real) samples.push_back({img, kReal});
    for (const Image& img : corpus.fake) samples.push_back({img, kFake});
    return samples;
}

} // namespace duet
