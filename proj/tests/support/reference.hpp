#ifndef DUET_TESTS_REFERENCE_HPP
#define DUET_TESTS_REFERENCE_HPP

#include <vector>

#include "duet/image.hpp"
#include "duet/imgops.hpp"
#include "duet/model.hpp"

// Independent oracles for the test suite. Each reimplements its formula in a
// deliberately different style from the library so agreement is evidence, not
// tautology.
namespace duet::testref {

/// Windowed SSIM via raw sum accumulators (sum, sum of squares, cross sum)
/// instead of mean-centered passes.
double ref_ssim(const Image& a, const Image& b, int window);

/// Zero-padded convolution as an explicit quadruple loop over output and
/// kernel coordinates, no special cases.
GradientField ref_convolve(const GradientField& field, const GaussianKernel& kernel);

/// Plain targeted PGD toward Real: own sign, step, and projection
/// arithmetic; the model gradient is the only shared operation. Returns
/// every iterate in order.
std::vector<Image> ref_plain_pgd(const Classifier& model, const Image& x, double epsilon,
                                 double alpha, int iterations);

/// Population variance via Welford's online update.
double ref_variance(const Image& x);

} // namespace duet::testref

#endif // DUET_TESTS_REFERENCE_HPP
