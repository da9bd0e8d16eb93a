#ifndef DUET_TESTS_GENERATORS_HPP
#define DUET_TESTS_GENERATORS_HPP

#include <algorithm>

#include "duet/image.hpp"
#include "duet/rng.hpp"

namespace duet::testgen {

inline Image random_image(int h, int w, Rng& rng) {
    Image img(h, w);
    for (double& p : img.pixels) p = rng.uniform();
    return img;
}

/// Clamped uniform perturbation of every pixel, radius in intensity units.
inline Image perturbed(const Image& x, double radius, Rng& rng) {
    Image out = x;
    for (double& p : out.pixels) p = std::clamp(p + rng.uniform(-radius, radius), 0.0, 1.0);
    return out;
}

inline GradientField random_field(int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
    GradientField f(h, w);
    for (double& v : f.values) v = rng.uniform(lo, hi);
    return f;
}

} // namespace duet::testgen

#endif // DUET_TESTS_GENERATORS_HPP
