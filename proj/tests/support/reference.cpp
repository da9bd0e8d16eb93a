#include "support/reference.hpp"

#include <stdexcept>

namespace duet::testref {

double ref_ssim(const Image& a, const Image& b, int window) {
    if (!a.same_shape(b)) throw std::invalid_argument("ref_ssim: shape mismatch");
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    const double n = static_cast<double>(window) * window;
    const int ny = a.height - window + 1;
    const int nx = a.width - window + 1;

    double total = 0.0;
    for (int c = 0; c < kChannels; ++c) {
        for (int y0 = 0; y0 < ny; ++y0) {
            for (int x0 = 0; x0 < nx; ++x0) {
                double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (int dy = 0; dy < window; ++dy) {
                    for (int dx = 0; dx < window; ++dx) {
                        const double va = a.at(y0 + dy, x0 + dx, c);
                        const double vb = b.at(y0 + dy, x0 + dx, c);
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                }
                const double mu_a = sa / n;
                const double mu_b = sb / n;
                const double var_a = saa / n - mu_a * mu_a;
                const double var_b = sbb / n - mu_b * mu_b;
                const double cov = sab / n - mu_a * mu_b;
                total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            }
        }
    }
    return total / (static_cast<double>(ny) * nx * kChannels);
}

GradientField ref_convolve(const GradientField& field, const GaussianKernel& kernel) {
    const int half = kernel.size / 2;
    GradientField out(field.height, field.width);
    for (int y = 0; y < field.height; ++y) {
        for (int x = 0; x < field.width; ++x) {
            for (int c = 0; c < kChannels; ++c) {
                double acc = 0.0;
                for (int i = -half; i <= half; ++i) {
                    for (int j = -half; j <= half; ++j) {
                        const int yy = y + i;
                        const int xx = x + j;
                        double v = 0.0;
                        if (yy >= 0 && yy < field.height && xx >= 0 && xx < field.width) {
                            v = field.at(yy, xx, c);
                        }
                        acc += kernel.at(i + half, j + half) * v;
                    }
                }
                out.at(y, x, c) = acc;
            }
        }
    }
    return out;
}

std::vector<Image> ref_plain_pgd(const Classifier& model, const Image& x, double epsilon,
                                 double alpha, int iterations) {
    LossConfig cfg;
    cfg.lambda_ssim = 0.0;
    cfg.target_label = kReal;

    std::vector<Image> iterates;
    iterates.reserve(iterations);
    Image cur = x;
    for (int t = 0; t < iterations; ++t) {
        const GradientField g = input_gradient(model, x, cur, cfg);
        Image next = cur;
        for (std::size_t i = 0; i < next.pixels.size(); ++i) {
            double step = 0.0;
            if (g.values[i] > 0.0) step = -1.0;
            else if (g.values[i] < 0.0) step = 1.0;
            double v = cur.pixels[i] + alpha * step;
            double lo = x.pixels[i] - epsilon;
            if (lo < 0.0) lo = 0.0;
            double hi = x.pixels[i] + epsilon;
            if (hi > 1.0) hi = 1.0;
            if (v < lo) v = lo;
            else if (v > hi) v = hi;
            next.pixels[i] = v;
        }
        cur = next;
        iterates.push_back(cur);
    }
    return iterates;
}

double ref_variance(const Image& x) {
    double mean = 0.0;
    double m2 = 0.0;
    double count = 0.0;
    for (double v : x.pixels) {
        count += 1.0;
        const double d = v - mean;
        mean += d / count;
        m2 += d * (v - mean);
    }
    return count > 0.0 ? m2 / count : 0.0;
}

} // namespace duet::testref
