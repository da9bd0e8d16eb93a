#include "duet/image.hpp"

#include <stdexcept>

namespace duet {

Image::Image(int h, int w, double fill)
    : height(h), width(w),
      pixels(static_cast<std::size_t>(h > 0 ? h : 0) * (w > 0 ? w : 0) * kChannels, fill) {
    if (h < 1 || w < 1) throw std::invalid_argument("Image: dimensions must be >= 1");
}

void Image::validate() const {
    if (height < 1 || width < 1)
        throw std::invalid_argument("Image: dimensions must be >= 1");
    if (pixels.size() != static_cast<std::size_t>(height) * width * kChannels)
        throw std::invalid_argument("Image: pixel buffer does not match dimensions");
    for (double v : pixels)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("Image: pixel intensity outside [0, 1]");
}

GradientField::GradientField(int h, int w, double fill)
    : height(h), width(w),
      values(static_cast<std::size_t>(h > 0 ? h : 0) * (w > 0 ? w : 0) * kChannels, fill) {
    if (h < 1 || w < 1) throw std::invalid_argument("GradientField: dimensions must be >= 1");
}

GradientField subtract(const Image& candidate, const Image& base) {
    if (!candidate.same_shape(base))
        throw std::invalid_argument("subtract: shape mismatch");
    GradientField out(candidate.height, candidate.width);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = candidate.pixels[i] - base.pixels[i];
    return out;
}

} // namespace duet
