#pragma once

// Chart rendering: the curve bundle (long curves beneath short ones), the
// price bars as [L, H] segments and, optionally, figure ridges on top.
// Raster output is PNG, vector output SVG. Pixel arithmetic is integer once
// ordinates are mapped, so identical inputs give identical bytes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <png.h>

#include "tn/density.hpp"
#include "tn/error.hpp"
#include "tn/figures.hpp"
#include "tn/ingest.hpp"
#include "tn/network.hpp"

namespace tn {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr std::size_t kMinImageSide = 64;

struct RenderStyle {
    std::size_t width = 1200;
    std::size_t height = 800;
    Rgb short_color{20, 150, 60};
    Rgb long_color{40, 80, 200};
    std::optional<std::size_t> short_threshold;  // ranks below are short; default N / 3
    std::uint8_t curve_alpha = 90;
    Rgb bar_color{0, 0, 0};
    bool overlay_figures = true;
    Rgb figure_color{210, 30, 30};
    Rgb background{255, 255, 255};

    void validate() const {
        if (width < kMinImageSide || height < kMinImageSide) throw ConfigError("image must be at least 64x64");
    }
};

struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    Image() = default;
    Image(std::size_t w, std::size_t h, Rgb fill) : width(w), height(h), rgb(w * h * 3) {
        for (std::size_t i = 0; i < w * h; ++i) {
            rgb[3 * i] = fill.r;
            rgb[3 * i + 1] = fill.g;
            rgb[3 * i + 2] = fill.b;
        }
    }
    [[nodiscard]] Rgb at(std::size_t x, std::size_t y) const {
        const auto* p = &rgb[3 * (y * width + x)];
        return {p[0], p[1], p[2]};
    }
    void set(std::size_t x, std::size_t y, Rgb c) {
        auto* p = &rgb[3 * (y * width + x)];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    void blend(std::size_t x, std::size_t y, Rgb c, std::uint8_t a) {
        auto* p = &rgb[3 * (y * width + x)];
        auto mix = [a](unsigned src, unsigned dst) {
            return static_cast<std::uint8_t>((src * a + dst * (255u - a) + 127u) / 255u);
        };
        p[0] = mix(c.r, p[0]);
        p[1] = mix(c.g, p[1]);
        p[2] = mix(c.b, p[2]);
    }
    friend bool operator==(const Image&, const Image&) = default;
};

/// Maps (bar column, ordinate) to continuous pixel coordinates. Column c
/// occupies [c - first, c - first + 1) * width / columns horizontally.
struct ViewTransform {
    ViewWindow view;
    double lo = 0.0;
    double hi = 1.0;
    std::size_t width = 0;
    std::size_t height = 0;

    [[nodiscard]] double px_per_column() const { return static_cast<double>(width) / static_cast<double>(view.size()); }
    [[nodiscard]] double x(double column) const {
        return (column - static_cast<double>(view.first) + 0.5) * px_per_column();
    }
    [[nodiscard]] double column(double px) const { return px / px_per_column() - 0.5 + static_cast<double>(view.first); }
    [[nodiscard]] double y(double v) const { return (hi - v) / (hi - lo) * static_cast<double>(height - 1); }
    [[nodiscard]] long row(double v) const { return std::lround(y(v)); }
};

/// Vertical extent used for drawing: bars and curves inside the view.
inline ViewTransform make_transform(const Network& net, const BarSeries& bars, ViewWindow view, const RenderStyle& st) {
    view.end = std::min({view.end, bars.size(), net.columns()});
    if (view.size() == 0) throw EmptyView();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t t = view.first; t < view.end; ++t) {
        lo = std::min(lo, bars[t].low());
        hi = std::max(hi, bars[t].high());
    }
    if (net.curve_count()) {
        const auto [clo, chi] = curve_range(net, view);
        if (clo <= chi) {
            lo = std::min(lo, clo);
            hi = std::max(hi, chi);
        }
    }
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.02 * (hi - lo);
    return {view, lo - pad, hi + pad, st.width, st.height};
}

namespace detail {

inline long clamp_row(long r, std::size_t h) { return std::clamp<long>(r, 0, static_cast<long>(h) - 1); }

/// Paints the rows between two continuous y values in pixel column px.
template <typename F>
void stroke_column(Image& img, std::size_t px, double ya, double yb, F&& paint) {
    long r0 = std::lround(std::min(ya, yb));
    long r1 = std::lround(std::max(ya, yb));
    r0 = clamp_row(r0, img.height);
    r1 = clamp_row(r1, img.height);
    for (long r = r0; r <= r1; ++r) paint(px, static_cast<std::size_t>(r));
}

/// Rasterizes a polyline of (column, ordinate) vertices as one vertical run
/// per pixel column: the run spans the polyline's y-extent over that pixel's
/// horizontal interval, so every pixel column is painted exactly once.
template <typename F>
void stroke_polyline(Image& img, const ViewTransform& tf, std::span<const RidgePoint> pts, F&& paint) {
    if (pts.size() < 2) return;
    const std::size_t n = pts.size();
    auto X = [&](std::size_t i) { return tf.x(pts[i].column); };
    auto Y = [&](std::size_t i) { return tf.y(pts[i].ordinate); };
    const double x0 = X(0);
    const double xn = X(n - 1);
    const long p0 = std::max<long>(0, static_cast<long>(std::floor(x0)));
    const long p1 = std::min<long>(static_cast<long>(img.width) - 1, static_cast<long>(std::ceil(xn)) - 1);
    std::size_t seg = 0;  // segment holding the pixel's left edge
    auto y_at = [&](std::size_t s, double x) {
        const double f = (x - X(s)) / (X(s + 1) - X(s));
        return Y(s) + f * (Y(s + 1) - Y(s));
    };
    for (long p = p0; p <= p1; ++p) {
        const double left = std::max(static_cast<double>(p), x0);
        const double right = std::min(static_cast<double>(p + 1), xn);
        while (seg + 2 < n && X(seg + 1) <= left) ++seg;
        double lo = y_at(seg, left);
        double hi = lo;
        std::size_t s = seg;
        while (s + 2 < n && X(s + 1) < right) {  // interior vertices
            lo = std::min(lo, Y(s + 1));
            hi = std::max(hi, Y(s + 1));
            ++s;
        }
        const double yr = y_at(s, right);
        stroke_column(img, static_cast<std::size_t>(p), std::min(lo, yr), std::max(hi, yr), paint);
    }
}

inline std::vector<RidgePoint> curve_points(const Network& net, std::size_t k, ViewWindow view) {
    std::vector<RidgePoint> pts;
    for (std::size_t t = std::max(view.first, net.start(k)); t < view.end; ++t)
        pts.push_back({static_cast<double>(t), net.value(k, t)});
    return pts;
}

}  // namespace detail

/// Renders bars[view] with the network behind them. Neither input is
/// modified; the image has exactly the style's dimensions.
inline Image render_chart(const Network& net, const BarSeries& bars, ViewWindow view,
                          std::span<const CharacteristicFigure> figures, const RenderStyle& style) {
    style.validate();
    const auto tf = make_transform(net, bars, view, style);
    view = tf.view;
    Image img(style.width, style.height, style.background);
    const std::size_t threshold = style.short_threshold.value_or(net.curve_count() / 3);

    // Longest curves first so the short ones end up on top.
    for (std::size_t k = net.curve_count(); k-- > 0;) {
        const auto pts = detail::curve_points(net, k, view);
        if (pts.size() < 2) continue;
        const Rgb c = k < threshold ? style.short_color : style.long_color;
        detail::stroke_polyline(img, tf, pts, [&](std::size_t x, std::size_t y) { img.blend(x, y, c, style.curve_alpha); });
    }

    // Bars: one opaque vertical segment per column, a third of the column wide.
    const double ppc = tf.px_per_column();
    const auto bar_w = static_cast<long>(std::max(1.0, std::floor(ppc / 3.0)));
    for (std::size_t t = view.first; t < view.end; ++t) {
        const long cx = static_cast<long>(std::floor(tf.x(static_cast<double>(t))));
        const long r0 = detail::clamp_row(tf.row(bars[t].high()), style.height);
        const long r1 = detail::clamp_row(tf.row(bars[t].low()), style.height);
        for (long x = cx - (bar_w - 1) / 2; x <= cx + bar_w / 2; ++x) {
            if (x < 0 || x >= static_cast<long>(style.width)) continue;
            for (long r = r0; r <= r1; ++r) img.set(static_cast<std::size_t>(x), static_cast<std::size_t>(r), style.bar_color);
        }
    }

    if (style.overlay_figures) {
        for (const auto& f : figures) {
            if (f.ridge.size() < 2) continue;
            detail::stroke_polyline(img, tf, f.ridge, [&](std::size_t x, std::size_t y) {
                img.set(x, y, style.figure_color);
                if (y + 1 < img.height) img.set(x, y + 1, style.figure_color);
            });
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// PNG

namespace detail {

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

}  // namespace detail

/// 8-bit RGB PNG with fixed compression settings and no time chunk.
inline std::vector<std::uint8_t> encode_png(const Image& img) {
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("PNG encoding failed");
    }
    png_set_write_fn(png, &out, detail::png_write_to_vector, nullptr);
    png_set_compression_level(png, 9);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.rgb.data() + 3 * img.width * y));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&im, bytes.data(), bytes.size())) throw DataError("not a PNG");
    im.format = PNG_FORMAT_RGB;
    Image img;
    img.width = im.width;
    img.height = im.height;
    img.rgb.resize(PNG_IMAGE_SIZE(im));
    if (!png_image_finish_read(&im, nullptr, img.rgb.data(), 0, nullptr)) {
        png_image_free(&im);
        throw DataError("PNG decode failed");
    }
    return img;
}

// ---------------------------------------------------------------------------
// SVG

inline std::string render_svg(const Network& net, const BarSeries& bars, ViewWindow view,
                              std::span<const CharacteristicFigure> figures, const RenderStyle& style) {
    style.validate();
    const auto tf = make_transform(net, bars, view, style);
    view = tf.view;
    const std::size_t threshold = style.short_threshold.value_or(net.curve_count() / 3);
    auto hex = [](Rgb c) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
        return std::string(buf);
    };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
       << "\" viewBox=\"0 0 " << style.width << ' ' << style.height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"" << hex(style.background) << "\"/>\n";
    const double opacity = style.curve_alpha / 255.0;
    for (std::size_t k = net.curve_count(); k-- > 0;) {
        const auto pts = detail::curve_points(net, k, view);
        if (pts.size() < 2) continue;
        os << "<polyline fill=\"none\" stroke=\"" << hex(k < threshold ? style.short_color : style.long_color)
           << "\" stroke-opacity=\"" << num(opacity) << "\" points=\"";
        for (const auto& p : pts) os << num(tf.x(p.column)) << ',' << num(tf.y(p.ordinate)) << ' ';
        os << "\"/>\n";
    }
    for (std::size_t t = view.first; t < view.end; ++t) {
        const double x = tf.x(static_cast<double>(t));
        os << "<line x1=\"" << num(x) << "\" x2=\"" << num(x) << "\" y1=\"" << num(tf.y(bars[t].high())) << "\" y2=\""
           << num(tf.y(bars[t].low())) << "\" stroke=\"" << hex(style.bar_color) << "\"/>\n";
    }
    if (style.overlay_figures) {
        for (const auto& f : figures) {
            os << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << hex(style.figure_color) << "\" data-kind=\""
               << to_string(f.kind) << "\" points=\"";
            for (const auto& p : f.ridge) os << num(tf.x(p.column)) << ',' << num(tf.y(p.ordinate)) << ' ';
            os << "\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Batches

/// instrument_resolution_subtype_window.png, e.g. ALPHA_10m_TN3_100-200.png
inline std::string render_file_name(const std::string& instrument, const std::string& resolution, int subtype,
                                    ViewWindow view, const std::string& ext = "png") {
    return instrument + "_" + resolution + "_TN" + std::to_string(subtype) + "_" + std::to_string(view.first) + "-" +
           std::to_string(view.end) + "." + ext;
}

struct RenderJob {
    const Network* network = nullptr;
    const BarSeries* bars = nullptr;
    ViewWindow view;
    std::span<const CharacteristicFigure> figures;
};

/// Renders independent charts in parallel; each chart is one task and the
/// output order follows the input order.
inline std::vector<std::vector<std::uint8_t>> render_batch(std::span<const RenderJob> jobs, const RenderStyle& style,
                                                           unsigned threads = 0) {
    std::vector<std::vector<std::uint8_t>> out(jobs.size());
    auto run = [&](std::size_t i) {
        out[i] = encode_png(render_chart(*jobs[i].network, *jobs[i].bars, jobs[i].view, jobs[i].figures, style));
    };
    const unsigned n = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    if (n <= 1 || jobs.size() <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < std::min<std::size_t>(n, jobs.size()); ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) run(i);
            });
    }
    return out;
}

}  // namespace tn
