#ifndef DUET_IMAGE_HPP
#define DUET_IMAGE_HPP

#include <cstddef>
#include <vector>

namespace duet {

inline constexpr int kChannels = 3;

/// RGB image with unit-interval intensities, row-major (height, width, channel).
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> pixels; // height * width * 3

    Image() = default;
    Image(int h, int w, double fill = 0.0);

    std::size_t size() const { return pixels.size(); }
    double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c]; }
    double at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c]; }

    bool same_shape(const Image& other) const { return height == other.height && width == other.width; }

    /// Throws std::invalid_argument unless dimensions are sane and every pixel is in [0, 1].
    void validate() const;
};

/// Per-pixel real field with the same layout as the Image it was computed
/// from. Values are unbounded (gradients, noise, deltas).
struct GradientField {
    int height = 0;
    int width = 0;
    std::vector<double> values; // height * width * 3

    GradientField() = default;
    GradientField(int h, int w, double fill = 0.0);

    std::size_t size() const { return values.size(); }
    double& at(int y, int x, int c) { return values[(static_cast<std::size_t>(y) * width + x) * kChannels + c]; }
    double at(int y, int x, int c) const { return values[(static_cast<std::size_t>(y) * width + x) * kChannels + c]; }

    bool same_shape(const GradientField& other) const { return height == other.height && width == other.width; }
    bool same_shape(const Image& img) const { return height == img.height && width == img.width; }
};

/// candidate - base, elementwise.
GradientField subtract(const Image& candidate, const Image& base);

} // namespace duet

#endif // DUET_IMAGE_HPP
