#ifndef DUET_IO_HPP
#define DUET_IO_HPP

#include <stdexcept>
#include <string>

#include "duet/image.hpp"

namespace duet {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Load an 8-bit RGB PNG. Grayscale/palette/alpha inputs are expanded or
/// stripped to RGB; intensities are divided by 255.
Image load_png(const std::string& path);

/// Save as 8-bit RGB PNG. Each intensity is quantized round-half-up to v*255.
void save_png(const Image& img, const std::string& path);

} // namespace duet

#endif // DUET_IO_HPP
