#ifndef DUET_IMGOPS_HPP
#define DUET_IMGOPS_HPP

#include <vector>

#include "duet/image.hpp"
#include "duet/rng.hpp"

namespace duet {

/// Normalized, reflection-symmetric square smoothing kernel.
struct GaussianKernel {
    int size = 1;       // odd
    double sigma = 1.0; // pixels
    std::vector<double> weights; // size * size, sums to 1

    double at(int i, int j) const { return weights[static_cast<std::size_t>(i) * size + j]; }
};

/// weights[i][j] proportional to exp(-((i-c)^2 + (j-c)^2) / (2 sigma^2)),
/// c = (size-1)/2, normalized to sum 1. size must be odd and >= 1, sigma > 0.
GaussianKernel gaussian_kernel(int size, double sigma);

/// Mean local SSIM over all sliding windows, computed per RGB channel and
/// averaged across channels. Uniform (unweighted) windows; stabilization
/// constants C1 = (0.01 L)^2, C2 = (0.03 L)^2 with dynamic range L = 1.
/// window must be odd and <= min(height, width).
double ssim(const Image& a, const Image& b, int window = 7);

/// Analytic gradient of ssim(a, b, window) with respect to b.
GradientField ssim_gradient(const Image& a, const Image& b, int window = 7);

/// Channel-wise 2-D convolution with zero padding; output shape equals input
/// shape. Kernel must fit inside the field.
GradientField convolve_same(const GradientField& field, const GaussianKernel& kernel);

/// With the given probability, downscale by a uniform factor in
/// [scale_min, scale_max] (bilinear, half-pixel centers) and zero-pad back to
/// the original size at a uniform offset; otherwise return x unchanged.
///
/// Draw order (fixed contract): probability roll, then scale, then row
/// offset, then column offset. The roll is consumed even when probability is
/// 0 or 1.
Image input_diversity(const Image& x, double probability, double scale_min, double scale_max, Rng& rng);

/// Classic 2-D gradient-lattice noise with quintic smoothstep interpolation,
/// scaled by amplitude and replicated across the 3 channels. grid_cells is
/// the number of lattice cells along each axis; unit gradients are drawn
/// row-major over the (grid_cells+1)^2 lattice nodes. Values lie in
/// [-amplitude, +amplitude] and vanish at lattice-node pixels.
GradientField perlin_noise(int height, int width, int grid_cells, double amplitude, Rng& rng);

/// Per pixel: clamp(contrast * (p - 0.5) + 0.5 + brightness, 0, 1). contrast > 0.
Image adjust_photometric(const Image& x, double contrast, double brightness);

/// Population variance over all H*W*3 intensities.
double pixel_variance(const Image& x);

/// Per-pixel clamp of candidate into [x - eps, x + eps] intersected with [0, 1].
Image project_linf(const Image& x, const Image& candidate, double epsilon);

// Field helpers used by the attack loops.

/// Elementwise sign, with sign(0) = 0.
GradientField sign_field(const GradientField& g);

/// Sum of absolute values.
double l1_norm(const GradientField& g);

/// Largest absolute value.
double max_abs(const GradientField& g);

} // namespace duet

#endif // DUET_IMGOPS_HPP
