#include "duet/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "duet/imgops.hpp"

namespace duet {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Volume {
    int h = 0, w = 0, c = 0;
    std::vector<double> v;
    Volume() = default;
    Volume(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {}
    double& at(int y, int x, int ch) { return v[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
    double at(int y, int x, int ch) const { return v[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
};

Volume to_volume(const Image& img) {
    Volume out(img.height, img.width, kChannels);
    out.v.assign(img.pixels.begin(), img.pixels.end());
    return out;
}

Volume conv3_same(const Volume& in, const std::vector<float>& wgt, const std::vector<float>& bias,
                  int cout) {
    Volume out(in.h, in.w, cout);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x)
            for (int oc = 0; oc < cout; ++oc) {
                double acc = bias[oc];
                for (int ic = 0; ic < in.c; ++ic)
                    for (int ky = 0; ky < 3; ++ky) {
                        const int yy = y + ky - 1;
                        if (yy < 0 || yy >= in.h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int xx = x + kx - 1;
                            if (xx < 0 || xx >= in.w) continue;
                            acc += static_cast<double>(wgt[((static_cast<std::size_t>(oc) * in.c + ic) * 3 + ky) * 3 + kx]) *
                                   in.at(yy, xx, ic);
                        }
                    }
                out.at(y, x, oc) = acc;
            }
    return out;
}

// Scatter form of the conv3_same transpose: din[y+ky-1][x+kx-1][ic] += w * dout[y][x][oc].
Volume conv3_same_backward_input(const Volume& dout, const std::vector<float>& wgt, int cin) {
    Volume din(dout.h, dout.w, cin);
    for (int y = 0; y < dout.h; ++y)
        for (int x = 0; x < dout.w; ++x)
            for (int oc = 0; oc < dout.c; ++oc) {
                const double g = dout.at(y, x, oc);
                if (g == 0.0) continue;
                for (int ic = 0; ic < cin; ++ic)
                    for (int ky = 0; ky < 3; ++ky) {
                        const int yy = y + ky - 1;
                        if (yy < 0 || yy >= dout.h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int xx = x + kx - 1;
                            if (xx < 0 || xx >= dout.w) continue;
                            din.at(yy, xx, ic) +=
                                static_cast<double>(wgt[((static_cast<std::size_t>(oc) * cin + ic) * 3 + ky) * 3 + kx]) * g;
                        }
                    }
            }
    return din;
}

void conv3_same_backward_params(const Volume& dout, const Volume& in, std::vector<double>& dw,
                                std::vector<double>& db) {
    for (int y = 0; y < dout.h; ++y)
        for (int x = 0; x < dout.w; ++x)
            for (int oc = 0; oc < dout.c; ++oc) {
                const double g = dout.at(y, x, oc);
                if (g == 0.0) continue;
                db[oc] += g;
                for (int ic = 0; ic < in.c; ++ic)
                    for (int ky = 0; ky < 3; ++ky) {
                        const int yy = y + ky - 1;
                        if (yy < 0 || yy >= in.h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int xx = x + kx - 1;
                            if (xx < 0 || xx >= in.w) continue;
                            dw[((static_cast<std::size_t>(oc) * in.c + ic) * 3 + ky) * 3 + kx] += g * in.at(yy, xx, ic);
                        }
                    }
            }
}

Volume avg_pool(const Volume& in, int p) {
    Volume out(in.h / p, in.w / p, in.c);
    const double inv = 1.0 / (p * p);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            for (int ch = 0; ch < in.c; ++ch) {
                double acc = 0.0;
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx) acc += in.at(y * p + dy, x * p + dx, ch);
                out.at(y, x, ch) = acc * inv;
            }
    return out;
}

Volume relu(const Volume& in) {
    Volume out = in;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    return out;
}

struct Trace {
    Volume x, z1, a1, p1, z2, a2;
    std::vector<double> gap;
    LogitPair logits{};
};

Trace forward_trace(const Classifier& m, const Image& img) {
    m.arch.validate();
    if (img.height < m.arch.pool || img.width < m.arch.pool)
        throw std::invalid_argument("forward: image smaller than pooling window");
    Trace t;
    t.x = to_volume(img);
    t.z1 = conv3_same(t.x, m.conv1_w, m.conv1_b, m.arch.conv1_channels);
    t.a1 = relu(t.z1);
    t.p1 = avg_pool(t.a1, m.arch.pool);
    t.z2 = conv3_same(t.p1, m.conv2_w, m.conv2_b, m.arch.conv2_channels);
    t.a2 = relu(t.z2);
    t.gap.assign(m.arch.conv2_channels, 0.0);
    const double inv = 1.0 / (static_cast<double>(t.a2.h) * t.a2.w);
    for (int y = 0; y < t.a2.h; ++y)
        for (int x = 0; x < t.a2.w; ++x)
            for (int ch = 0; ch < t.a2.c; ++ch) t.gap[ch] += t.a2.at(y, x, ch) * inv;
    for (int j = 0; j < 2; ++j) {
        double acc = m.dense_b[j];
        for (int ch = 0; ch < m.arch.conv2_channels; ++ch)
            acc += static_cast<double>(m.dense_w[static_cast<std::size_t>(j) * m.arch.conv2_channels + ch]) * t.gap[ch];
        t.logits[j] = acc;
    }
    return t;
}

struct ParamGrads {
    std::vector<double> c1w, c1b, c2w, c2b, dw, db;
    explicit ParamGrads(const ClassifierArch& a)
        : c1w(static_cast<std::size_t>(a.conv1_channels) * kChannels * 9, 0.0),
          c1b(a.conv1_channels, 0.0),
          c2w(static_cast<std::size_t>(a.conv2_channels) * a.conv1_channels * 9, 0.0),
          c2b(a.conv2_channels, 0.0),
          dw(static_cast<std::size_t>(2) * a.conv2_channels, 0.0),
          db(2, 0.0) {}
};

// Backpropagates dlogits; fills pg and/or dinput when non-null.
void backward(const Classifier& m, const Trace& t, const LogitPair& dlogits, ParamGrads* pg,
              Volume* dinput) {
    const int c2 = m.arch.conv2_channels;
    std::vector<double> dgap(c2, 0.0);
    for (int j = 0; j < 2; ++j) {
        if (pg) pg->db[j] += dlogits[j];
        for (int ch = 0; ch < c2; ++ch) {
            dgap[ch] += static_cast<double>(m.dense_w[static_cast<std::size_t>(j) * c2 + ch]) * dlogits[j];
            if (pg) pg->dw[static_cast<std::size_t>(j) * c2 + ch] += dlogits[j] * t.gap[ch];
        }
    }

    Volume dz2(t.z2.h, t.z2.w, t.z2.c);
    const double inv_gap = 1.0 / (static_cast<double>(t.a2.h) * t.a2.w);
    for (int y = 0; y < dz2.h; ++y)
        for (int x = 0; x < dz2.w; ++x)
            for (int ch = 0; ch < dz2.c; ++ch)
                dz2.at(y, x, ch) = t.z2.at(y, x, ch) > 0.0 ? dgap[ch] * inv_gap : 0.0;

    if (pg) conv3_same_backward_params(dz2, t.p1, pg->c2w, pg->c2b);
    const Volume dp1 = conv3_same_backward_input(dz2, m.conv2_w, m.arch.conv1_channels);

    const int p = m.arch.pool;
    Volume dz1(t.z1.h, t.z1.w, t.z1.c);
    const double inv_pool = 1.0 / (p * p);
    for (int y = 0; y < dp1.h * p; ++y)
        for (int x = 0; x < dp1.w * p; ++x)
            for (int ch = 0; ch < dz1.c; ++ch)
                dz1.at(y, x, ch) = t.z1.at(y, x, ch) > 0.0 ? dp1.at(y / p, x / p, ch) * inv_pool : 0.0;

    if (pg) conv3_same_backward_params(dz1, t.x, pg->c1w, pg->c1b);
    if (dinput) *dinput = conv3_same_backward_input(dz1, m.conv1_w, kChannels);
}

LogitPair ce_dlogits(const LogitPair& logits, int target) {
    const LogitPair p = softmax(logits);
    return {p[0] - (target == 0 ? 1.0 : 0.0), p[1] - (target == 1 ? 1.0 : 0.0)};
}

void xavier_fill(std::vector<float>& dst, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (float& w : dst) w = static_cast<float>(rng.uniform(-limit, limit));
}

} // namespace

void ClassifierArch::validate() const {
    if (conv1_channels < 1 || conv2_channels < 1 || pool < 1)
        throw std::invalid_argument("ClassifierArch: channels and pool must be >= 1");
    if (conv1_channels > 1024 || conv2_channels > 1024 || pool > 64)
        throw std::invalid_argument("ClassifierArch: implausibly large descriptor");
}

Classifier Classifier::init(const ClassifierArch& arch, Rng& rng) {
    arch.validate();
    Classifier m;
    m.arch = arch;
    m.conv1_w.assign(static_cast<std::size_t>(arch.conv1_channels) * kChannels * 9, 0.0f);
    m.conv1_b.assign(arch.conv1_channels, 0.0f);
    m.conv2_w.assign(static_cast<std::size_t>(arch.conv2_channels) * arch.conv1_channels * 9, 0.0f);
    m.conv2_b.assign(arch.conv2_channels, 0.0f);
    m.dense_w.assign(static_cast<std::size_t>(2) * arch.conv2_channels, 0.0f);
    m.dense_b.assign(2, 0.0f);
    xavier_fill(m.conv1_w, kChannels * 9, arch.conv1_channels * 9, rng);
    xavier_fill(m.conv2_w, arch.conv1_channels * 9, arch.conv2_channels * 9, rng);
    xavier_fill(m.dense_w, arch.conv2_channels, 2, rng);
    return m;
}

LogitPair forward(const Classifier& model, const Image& x) {
    return forward_trace(model, x).logits;
}

LogitPair softmax(const LogitPair& logits) {
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    const double z = e0 + e1;
    return {e0 / z, e1 / z};
}

int predict(const Classifier& model, const Image& x) {
    const LogitPair z = forward(model, x);
    return z[kReal] > z[kFake] ? kReal : kFake;
}

double loss_misclassification(const Classifier& model, const Image& x, int target) {
    const LogitPair z = forward(model, x);
    const double m = std::max(z[0], z[1]);
    const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
    return lse - z[target];
}

double total_loss(const Classifier& model, const Image& x_orig, const Image& x_adv,
                  const LossConfig& cfg) {
    double loss = loss_misclassification(model, x_adv, cfg.target_label);
    if (cfg.lambda_ssim != 0.0)
        loss += cfg.lambda_ssim * (1.0 - ssim(x_orig, x_adv, cfg.ssim_window));
    return loss;
}

GradientField input_gradient(const Classifier& model, const Image& x_orig, const Image& x_adv,
                             const LossConfig& cfg) {
    if (!x_orig.same_shape(x_adv)) throw std::invalid_argument("input_gradient: shape mismatch");
    const Trace t = forward_trace(model, x_adv);
    Volume din;
    backward(model, t, ce_dlogits(t.logits, cfg.target_label), nullptr, &din);
    GradientField grad(x_adv.height, x_adv.width);
    grad.values = std::move(din.v);
    if (cfg.lambda_ssim != 0.0) {
        const GradientField gs = ssim_gradient(x_orig, x_adv, cfg.ssim_window);
        for (std::size_t i = 0; i < grad.values.size(); ++i)
            grad.values[i] -= cfg.lambda_ssim * gs.values[i];
    }
    return grad;
}

SaliencyMask saliency_map(const Classifier& model, const Image& x, int target) {
    LossConfig cfg;
    cfg.lambda_ssim = 0.0;
    cfg.target_label = target;
    GradientField mask = input_gradient(model, x, x, cfg);
    for (double& v : mask.values) v = std::abs(v);
    const double m = max_abs(mask);
    if (m > 0.0)
        for (double& v : mask.values) v /= m;
    return mask;
}

TrainResult train_detector(const std::vector<TrainSample>& dataset, const ClassifierArch& arch,
                           const TrainHyper& hyper) {
    bool has_fake = false, has_real = false;
    for (const TrainSample& s : dataset) {
        if (s.label == kFake) has_fake = true;
        else if (s.label == kReal) has_real = true;
        else throw std::invalid_argument("train_detector: label must be 0 (Fake) or 1 (Real)");
    }
    if (!has_fake || !has_real)
        throw std::invalid_argument("train_detector: dataset must contain both classes");
    if (hyper.epochs < 0 || hyper.batch_size < 1 || !(hyper.learning_rate > 0.0))
        throw std::invalid_argument("train_detector: invalid hyperparameters");

    Rng rng(hyper.seed);
    Classifier model = Classifier::init(arch, rng);
    const std::size_t n = dataset.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    // Classical momentum; the velocity lives in doubles so the float
    // parameters only quantize once per update.
    constexpr double kMomentum = 0.9;
    ParamGrads velocity(arch);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        // Cosine-annealed step size: the run ends settled instead of
        // oscillating around the minimum at full speed.
        const double lr = hyper.learning_rate * 0.5 *
                          (1.0 + std::cos(kPi * epoch / hyper.epochs));
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);
        for (std::size_t start = 0; start < n; start += hyper.batch_size) {
            const std::size_t end = std::min(n, start + hyper.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            ParamGrads pg(arch);
            for (std::size_t i = start; i < end; ++i) {
                const TrainSample& s = dataset[order[i]];
                const Trace t = forward_trace(model, s.image);
                LogitPair dl = ce_dlogits(t.logits, s.label);
                dl[0] *= inv_batch;
                dl[1] *= inv_batch;
                backward(model, t, dl, &pg, nullptr);
            }
            auto apply = [lr](std::vector<float>& theta, std::vector<double>& vel,
                              const std::vector<double>& g) {
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    vel[i] = kMomentum * vel[i] + g[i];
                    theta[i] = static_cast<float>(static_cast<double>(theta[i]) - lr * vel[i]);
                }
            };
            apply(model.conv1_w, velocity.c1w, pg.c1w);
            apply(model.conv1_b, velocity.c1b, pg.c1b);
            apply(model.conv2_w, velocity.c2w, pg.c2w);
            apply(model.conv2_b, velocity.c2b, pg.c2b);
            apply(model.dense_w, velocity.dw, pg.dw);
            apply(model.dense_b, velocity.db, pg.db);
        }
    }
    const double acc = accuracy(model, dataset);
    return {std::move(model), acc};
}

double accuracy(const Classifier& model, const std::vector<TrainSample>& dataset) {
    if (dataset.empty()) return 0.0;
    std::size_t hits = 0;
    for (const TrainSample& s : dataset)
        if (predict(model, s.image) == s.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

namespace {

constexpr char kMagic[8] = {'D', 'U', 'E', 'T', 'M', 'D', 'L', '\n'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_floats(std::string& out, const std::vector<float>& vals) {
    for (float f : vals) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
public:
    Reader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}
    std::uint32_t u32() {
        if (pos_ + 4 > buf_.size()) throw ModelTruncationError("truncated model file: " + path_);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf_[pos_ + i]);
        pos_ += 4;
        return v;
    }
    void floats(std::vector<float>& dst, std::size_t count) {
        dst.resize(count);
        for (std::size_t i = 0; i < count; ++i) dst[i] = std::bit_cast<float>(u32());
    }
    std::size_t remaining() const { return buf_.size() - pos_; }
    std::size_t pos_ = 0;

private:
    const std::string& buf_;
    std::string path_;
};

} // namespace

void save_model(const Classifier& model, const std::string& path) {
    model.arch.validate();
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(model.arch.conv1_channels));
    put_u32(out, static_cast<std::uint32_t>(model.arch.conv2_channels));
    put_u32(out, static_cast<std::uint32_t>(model.arch.pool));
    put_floats(out, model.conv1_w);
    put_floats(out, model.conv1_b);
    put_floats(out, model.conv2_w);
    put_floats(out, model.conv2_b);
    put_floats(out, model.dense_w);
    put_floats(out, model.dense_b);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

Classifier load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kMagic)) throw ModelTruncationError("truncated model file: " + path);
    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw ModelFormatError("bad magic bytes: " + path);

    Reader r(buf, path);
    r.pos_ = sizeof(kMagic);
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw ModelVersionError("unsupported model version " + std::to_string(version) + ": " + path);

    Classifier m;
    m.arch.conv1_channels = static_cast<int>(r.u32());
    m.arch.conv2_channels = static_cast<int>(r.u32());
    m.arch.pool = static_cast<int>(r.u32());
    try {
        m.arch.validate();
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(std::string("invalid architecture descriptor: ") + e.what());
    }
    r.floats(m.conv1_w, static_cast<std::size_t>(m.arch.conv1_channels) * kChannels * 9);
    r.floats(m.conv1_b, m.arch.conv1_channels);
    r.floats(m.conv2_w, static_cast<std::size_t>(m.arch.conv2_channels) * m.arch.conv1_channels * 9);
    r.floats(m.conv2_b, m.arch.conv2_channels);
    r.floats(m.dense_w, static_cast<std::size_t>(2) * m.arch.conv2_channels);
    r.floats(m.dense_b, 2);
    if (r.remaining() != 0) throw ModelFormatError("trailing bytes in model file: " + path);
    return m;
}

} // namespace duet
