#include "duet/imgops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace duet {

namespace {

constexpr double kC1 = 0.01 * 0.01; // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03; // (K2 * L)^2

void check_ssim_inputs(const Image& a, const Image& b, int window) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("ssim: window must be odd and >= 1");
    if (window > a.height || window > a.width)
        throw std::invalid_argument("ssim: window larger than image");
}

struct WindowStats {
    double mu_a, mu_b, var_a, var_b, cov;
};

WindowStats window_stats(const Image& a, const Image& b, int y0, int x0, int window, int c) {
    const double n = static_cast<double>(window) * window;
    double sa = 0.0, sb = 0.0;
    for (int y = y0; y < y0 + window; ++y)
        for (int x = x0; x < x0 + window; ++x) {
            sa += a.at(y, x, c);
            sb += b.at(y, x, c);
        }
    WindowStats s{};
    s.mu_a = sa / n;
    s.mu_b = sb / n;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (int y = y0; y < y0 + window; ++y)
        for (int x = x0; x < x0 + window; ++x) {
            const double da = a.at(y, x, c) - s.mu_a;
            const double db = b.at(y, x, c) - s.mu_b;
            va += da * da;
            vb += db * db;
            cov += da * db;
        }
    s.var_a = va / n;
    s.var_b = vb / n;
    s.cov = cov / n;
    return s;
}

} // namespace

double ssim(const Image& a, const Image& b, int window) {
    check_ssim_inputs(a, b, window);
    const int ny = a.height - window + 1;
    const int nx = a.width - window + 1;
    const double n_windows = static_cast<double>(ny) * nx;

    double channel_mean_sum = 0.0;
    for (int c = 0; c < kChannels; ++c) {
        double acc = 0.0;
        for (int y0 = 0; y0 < ny; ++y0)
            for (int x0 = 0; x0 < nx; ++x0) {
                const WindowStats s = window_stats(a, b, y0, x0, window, c);
                const double num = (2.0 * s.mu_a * s.mu_b + kC1) * (2.0 * s.cov + kC2);
                const double den = (s.mu_a * s.mu_a + s.mu_b * s.mu_b + kC1) * (s.var_a + s.var_b + kC2);
                acc += num / den;
            }
        channel_mean_sum += acc / n_windows;
    }
    return channel_mean_sum / kChannels;
}

GradientField ssim_gradient(const Image& a, const Image& b, int window) {
    check_ssim_inputs(a, b, window);
    const int ny = a.height - window + 1;
    const int nx = a.width - window + 1;
    const double n = static_cast<double>(window) * window;
    // Each window mean carries weight 1 / (n_windows * channels) in the total.
    const double w_out = 1.0 / (static_cast<double>(ny) * nx * kChannels);

    GradientField grad(a.height, a.width);
    for (int c = 0; c < kChannels; ++c)
        for (int y0 = 0; y0 < ny; ++y0)
            for (int x0 = 0; x0 < nx; ++x0) {
                const WindowStats s = window_stats(a, b, y0, x0, window, c);
                const double a1 = 2.0 * s.mu_a * s.mu_b + kC1;
                const double a2 = 2.0 * s.cov + kC2;
                const double b1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + kC1;
                const double b2 = s.var_a + s.var_b + kC2;
                const double val = (a1 * a2) / (b1 * b2);
                // d(window SSIM)/d b_j
                //   = (2/n) * [mu_a*A2 + (a_j - mu_a)*A1 - S*(mu_b*B2 + (b_j - mu_b)*B1)] / (B1*B2)
                const double scale = 2.0 / (n * b1 * b2) * w_out;
                for (int y = y0; y < y0 + window; ++y)
                    for (int x = x0; x < x0 + window; ++x) {
                        const double da = a.at(y, x, c) - s.mu_a;
                        const double db = b.at(y, x, c) - s.mu_b;
                        grad.at(y, x, c) += scale * (s.mu_a * a2 + da * a1 - val * (s.mu_b * b2 + db * b1));
                    }
            }
    return grad;
}

GaussianKernel gaussian_kernel(int size, double sigma) {
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("gaussian_kernel: size must be odd and >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
    GaussianKernel k;
    k.size = size;
    k.sigma = sigma;
    k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
    const double c = (size - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
            const double w = std::exp(-d2 / (2.0 * sigma * sigma));
            k.weights[static_cast<std::size_t>(i) * size + j] = w;
            total += w;
        }
    for (double& w : k.weights) w /= total;
    return k;
}

GradientField convolve_same(const GradientField& field, const GaussianKernel& kernel) {
    if (kernel.size > field.height || kernel.size > field.width)
        throw std::invalid_argument("convolve_same: kernel larger than field");
    if (kernel.size == 1) {
        GradientField out = field;
        const double w = kernel.weights[0];
        if (w != 1.0)
            for (double& v : out.values) v *= w;
        return out;
    }
    const int half = kernel.size / 2;
    GradientField out(field.height, field.width);
    for (int y = 0; y < field.height; ++y)
        for (int x = 0; x < field.width; ++x)
            for (int c = 0; c < kChannels; ++c) {
                double acc = 0.0;
                for (int i = 0; i < kernel.size; ++i) {
                    const int yy = y + i - half;
                    if (yy < 0 || yy >= field.height) continue;
                    for (int j = 0; j < kernel.size; ++j) {
                        const int xx = x + j - half;
                        if (xx < 0 || xx >= field.width) continue;
                        acc += kernel.at(i, j) * field.at(yy, xx, c);
                    }
                }
                out.at(y, x, c) = acc;
            }
    return out;
}

namespace {

double bilinear_sample(const Image& src, double sy, double sx, int c) {
    sy = std::clamp(sy, 0.0, static_cast<double>(src.height - 1));
    sx = std::clamp(sx, 0.0, static_cast<double>(src.width - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const int x1 = std::min(x0 + 1, src.width - 1);
    const double fy = sy - y0;
    const double fx = sx - x0;
    const double top = src.at(y0, x0, c) * (1.0 - fx) + src.at(y0, x1, c) * fx;
    const double bot = src.at(y1, x0, c) * (1.0 - fx) + src.at(y1, x1, c) * fx;
    return top * (1.0 - fy) + bot * fy;
}

Image bilinear_resize(const Image& src, int new_h, int new_w) {
    Image out(new_h, new_w);
    const double ry = static_cast<double>(src.height) / new_h;
    const double rx = static_cast<double>(src.width) / new_w;
    for (int y = 0; y < new_h; ++y)
        for (int x = 0; x < new_w; ++x) {
            const double sy = (y + 0.5) * ry - 0.5;
            const double sx = (x + 0.5) * rx - 0.5;
            for (int c = 0; c < kChannels; ++c)
                out.at(y, x, c) = bilinear_sample(src, sy, sx, c);
        }
    return out;
}

} // namespace

Image input_diversity(const Image& x, double probability, double scale_min, double scale_max, Rng& rng) {
    if (!(scale_min > 0.0 && scale_min <= scale_max && scale_max <= 1.0))
        throw std::invalid_argument("input_diversity: need 0 < scale_min <= scale_max <= 1");
    const double roll = rng.uniform();
    if (roll >= probability) return x;

    const double scale = rng.uniform(scale_min, scale_max);
    const int new_h = std::max(1, static_cast<int>(std::lround(x.height * scale)));
    const int new_w = std::max(1, static_cast<int>(std::lround(x.width * scale)));
    const int oy = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(x.height - new_h + 1)));
    const int ox = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(x.width - new_w + 1)));

    if (new_h == x.height && new_w == x.width) return x;

    const Image resized = bilinear_resize(x, new_h, new_w);
    Image out(x.height, x.width, 0.0);
    for (int y = 0; y < new_h; ++y)
        for (int xx = 0; xx < new_w; ++xx)
            for (int c = 0; c < kChannels; ++c)
                out.at(oy + y, ox + xx, c) = resized.at(y, xx, c);
    return out;
}

GradientField perlin_noise(int height, int width, int grid_cells, double amplitude, Rng& rng) {
    if (height < 1 || width < 1) throw std::invalid_argument("perlin_noise: dimensions must be positive");
    if (grid_cells < 1) throw std::invalid_argument("perlin_noise: grid_cells must be >= 1");
    if (amplitude < 0.0) throw std::invalid_argument("perlin_noise: amplitude must be >= 0");

    const int nodes = grid_cells + 1;
    std::vector<double> gx(static_cast<std::size_t>(nodes) * nodes);
    std::vector<double> gy(static_cast<std::size_t>(nodes) * nodes);
    for (int i = 0; i < nodes; ++i)
        for (int j = 0; j < nodes; ++j) {
            const double angle = rng.uniform() * 6.283185307179586476925286766559;
            gy[static_cast<std::size_t>(i) * nodes + j] = std::sin(angle);
            gx[static_cast<std::size_t>(i) * nodes + j] = std::cos(angle);
        }

    auto fade = [](double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); };

    GradientField out(height, width);
    for (int y = 0; y < height; ++y) {
        const double fy = static_cast<double>(y) * grid_cells / height;
        const int cy = std::min(static_cast<int>(fy), grid_cells - 1);
        const double ty = fy - cy;
        for (int x = 0; x < width; ++x) {
            const double fx = static_cast<double>(x) * grid_cells / width;
            const int cx = std::min(static_cast<int>(fx), grid_cells - 1);
            const double tx = fx - cx;

            auto dot = [&](int ny, int nx_, double dy, double dx) {
                const std::size_t idx = static_cast<std::size_t>(ny) * nodes + nx_;
                return gy[idx] * dy + gx[idx] * dx;
            };
            const double d00 = dot(cy, cx, ty, tx);
            const double d01 = dot(cy, cx + 1, ty, tx - 1.0);
            const double d10 = dot(cy + 1, cx, ty - 1.0, tx);
            const double d11 = dot(cy + 1, cx + 1, ty - 1.0, tx - 1.0);
            const double uy = fade(ty);
            const double ux = fade(tx);
            const double top = d00 + ux * (d01 - d00);
            const double bot = d10 + ux * (d11 - d10);
            const double v = (top + uy * (bot - top)) * amplitude;
            for (int c = 0; c < kChannels; ++c) out.at(y, x, c) = v;
        }
    }
    return out;
}

Image adjust_photometric(const Image& x, double contrast, double brightness) {
    if (!(contrast > 0.0)) throw std::invalid_argument("adjust_photometric: contrast must be positive");
    Image out = x;
    for (double& p : out.pixels)
        p = std::clamp(contrast * (p - 0.5) + 0.5 + brightness, 0.0, 1.0);
    return out;
}

double pixel_variance(const Image& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x.pixels) mean += v;
    mean /= n;
    double acc = 0.0;
    for (double v : x.pixels) acc += (v - mean) * (v - mean);
    return acc / n;
}

Image project_linf(const Image& x, const Image& candidate, double epsilon) {
    if (!x.same_shape(candidate)) throw std::invalid_argument("project_linf: shape mismatch");
    if (epsilon < 0.0) throw std::invalid_argument("project_linf: epsilon must be >= 0");
    Image out = candidate;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const double lo = std::max(x.pixels[i] - epsilon, 0.0);
        const double hi = std::min(x.pixels[i] + epsilon, 1.0);
        out.pixels[i] = std::clamp(out.pixels[i], lo, hi);
    }
    return out;
}

GradientField sign_field(const GradientField& g) {
    GradientField out(g.height, g.width);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        const double v = g.values[i];
        out.values[i] = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    }
    return out;
}

double l1_norm(const GradientField& g) {
    double acc = 0.0;
    for (double v : g.values) acc += std::abs(v);
    return acc;
}

double max_abs(const GradientField& g) {
    double m = 0.0;
    for (double v : g.values) m = std::max(m, std::abs(v));
    return m;
}

} // namespace duet
