#include "mana/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "mana/error.hpp"

namespace mana {

namespace {

void require_same_shape(const Tensor<float>& a, const Tensor<float>& b, const char* what)
{
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                         " differ");
    }
}

constexpr int kWindow = 11;

std::array<double, kWindow> gaussian_taps()
{
    std::array<double, kWindow> g{};
    double total = 0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        total += g[i];
    }
    for (double& v : g) v /= total;
    return g;
}

/// Separable valid-mode filtering of one H x W plane.
std::vector<double> filter_valid(const std::vector<double>& in, std::size_t h, std::size_t w,
                                 const std::array<double, kWindow>& g)
{
    const std::size_t oh = h - kWindow + 1, ow = w - kWindow + 1;
    std::vector<double> rows(h * ow, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0;
            for (int k = 0; k < kWindow; ++k) acc += g[k] * in[y * w + x + k];
            rows[y * ow + x] = acc;
        }
    std::vector<double> out(oh * ow, 0.0);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0;
            for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    return out;
}

} // namespace

double psnr(const Tensor<float>& a, const Tensor<float>& b, double max_val)
{
    require_same_shape(a, b, "psnr");
    if (a.numel() == 0) throw ShapeError("psnr: empty images");
    double se = 0;
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(x.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(max_val * max_val / mse));
}

double ssim(const Tensor<float>& a, const Tensor<float>& b)
{
    require_same_shape(a, b, "ssim");
    if (a.rank() != 3) throw ShapeError("ssim: expected C x H x W, got " + shape_string(a.shape()));
    const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
    if (h < kWindow || w < kWindow) {
        throw ShapeError("ssim: image " + shape_string(a.shape()) + " is smaller than the 11x11 window");
    }
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const auto g = gaussian_taps();
    const std::size_t plane = h * w;
    double total = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            x[i] = a[ch * plane + i];
            y[i] = b[ch * plane + i];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
        const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g), sxy = filter_valid(xy, h, w, g);
        double acc = 0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / static_cast<double>(c);
}

std::vector<MetricRow> aggregate_rows(const std::vector<MetricRow>& rows)
{
    std::vector<MetricRow> out;
    std::map<std::string, std::size_t> counts;
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const MetricRow& m) { return m.method == r.method; });
        if (it == out.end()) {
            out.push_back({"mean", r.method, 0, 0});
            it = out.end() - 1;
        }
        it->psnr_db += r.psnr_db;
        it->ssim += r.ssim;
        ++counts[r.method];
    }
    for (auto& m : out) {
        m.psnr_db /= static_cast<double>(counts[m.method]);
        m.ssim /= static_cast<double>(counts[m.method]);
    }
    return out;
}

std::string metrics_csv(const std::vector<MetricRow>& rows)
{
    std::string out = "clip,method,psnr_db,ssim\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", r.psnr_db, r.ssim);
        out += r.clip + "," + r.method + buf;
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

} // namespace mana
