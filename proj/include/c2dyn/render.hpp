#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#ifdef C2DYN_HAVE_PNG
#include <png.h>
#endif

#include "cycles.hpp"
#include "green.hpp"
#include "parallel.hpp"

namespace c2dyn {

enum class PointClass { Bounded, EscapingNearJPi, EscapingToPiAttractor };

struct Classification {
    PointClass cls = PointClass::Bounded;
    int cycle = -1; // for EscapingToPiAttractor
};

struct ClassifyOptions {
    int budget = 500;          // iterations allowed to leave the escape ball
    int direction_budget = 16; // capture must happen before this step
    double capture = 1e-3;     // chordal radius around attracting cycle points
};

namespace detail {
inline constexpr double kDirectionSwitch = 1e20;
}

/// Follows the orbit of p. An escaping orbit whose direction comes within
/// `capture` of an attracting cycle of f_Pi before step direction_budget is
/// assigned to that cycle; other escaping orbits are EscapingNearJPi. Past
/// |x| = 1e20 only the direction is iterated.
inline Classification classify(const MapSpec& f, const EscapeData& e, const RationalMap& g, const CycleReport& cycles,
                               const Vec2& p, const ClassifyOptions& opt = {}) {
    Vec2 x = p;
    int n = 0;
    for (; n < opt.budget; ++n) {
        double r = norm(x);
        if (r > e.radius) break;
        x = f.eval(x);
    }
    if (n >= opt.budget) return {};
    for (; n < opt.direction_budget; ++n) {
        ProjectivePoint a(x);
        int id = nearest_cycle(cycles, a, opt.capture);
        if (id >= 0) return {PointClass::EscapingToPiAttractor, id};
        if (norm(x) > detail::kDirectionSwitch) {
            for (++n; n < opt.direction_budget; ++n) {
                a = g(a);
                id = nearest_cycle(cycles, a, opt.capture);
                if (id >= 0) return {PointClass::EscapingToPiAttractor, id};
            }
            break;
        }
        x = f.eval(x);
    }
    return {PointClass::EscapingNearJPi, -1};
}

/// Same capture rule on Pi alone; -1 when no cycle captures a in time.
inline int classify_pi(const RationalMap& g, const CycleReport& cycles, ProjectivePoint a, const ClassifyOptions& opt = {}) {
    for (int n = 0; n < opt.direction_budget; ++n) {
        int id = nearest_cycle(cycles, a, opt.capture);
        if (id >= 0) return id;
        a = g(a);
    }
    return -1;
}

/// Affine complex line base + t dir, viewed through the square window
/// |Re t - Re center|, |Im t - Im center| <= half_width.
struct SliceSpec {
    Vec2 base = Vec2::Zero();
    Vec2 dir = make_vec(0.0, 1.0);
    cplx center = 0.0;
    double half_width = 2.0;
    int resolution = 512;
    ClassifyOptions classify;

    void validate() const {
        if (resolution < 0 || resolution > 8192) throw Error(ErrorCode::Config, "resolution must be in [0, 8192]");
        if (!(half_width > 0.0)) throw Error(ErrorCode::Config, "half-width must be positive");
        if (norm(dir) == 0.0) throw Error(ErrorCode::Config, "zero direction");
    }

    /// Parameter at the centre of pixel (row, col); row 0 is the top.
    cplx param(int row, int col) const {
        double px = (2.0 * (col + 0.5) / resolution - 1.0) * half_width;
        double py = (1.0 - 2.0 * (row + 0.5) / resolution) * half_width;
        return center + cplx(px, py);
    }

    Vec2 point(int row, int col) const { return base + param(row, col) * dir; }
};

/// The horizontal line {z = c}, parametrized by w.
inline SliceSpec slice_z_equals(cplx c, double half_width, int resolution, cplx center = 0.0) {
    SliceSpec s;
    s.base = make_vec(c, 0.0);
    s.dir = make_vec(0.0, 1.0);
    s.center = center;
    s.half_width = half_width;
    s.resolution = resolution;
    return s;
}

struct Image {
    int width = 0, height = 0;
    int maxval = 255; // 255 or 65535
    std::vector<std::uint16_t> px; // row-major

    bool empty() const { return px.empty(); }
    std::uint16_t at(int row, int col) const { return px[static_cast<std::size_t>(row) * width + col]; }
};

// pixel values of slice_render
inline constexpr std::uint16_t kPixelBounded = 0;
inline constexpr std::uint16_t kPixelNearJPi = 255;
inline std::uint16_t pixel_for_cycle(int id) { return static_cast<std::uint16_t>(64 + std::min(id, 127)); }

inline Image slice_render(const MapSpec& f, const SliceSpec& s, unsigned threads = 0) {
    s.validate();
    require_regular(f);
    Image img;
    img.width = img.height = s.resolution;
    if (s.resolution == 0) return img;
    EscapeData e = escape_data(f);
    RationalMap g(f);
    CycleReport cyc = attracting_cycles(g);
    img.px.assign(static_cast<std::size_t>(s.resolution) * s.resolution, 0);
    parallel_for(static_cast<std::size_t>(s.resolution), threads, [&](std::size_t row) {
        for (int col = 0; col < s.resolution; ++col) {
            auto c = classify(f, e, g, cyc, s.point(static_cast<int>(row), col), s.classify);
            std::uint16_t v = kPixelBounded;
            if (c.cls == PointClass::EscapingNearJPi) v = kPixelNearJPi;
            else if (c.cls == PointClass::EscapingToPiAttractor) v = pixel_for_cycle(c.cycle);
            img.px[row * static_cast<std::size_t>(s.resolution) + static_cast<std::size_t>(col)] = v;
        }
    });
    return img;
}

/// 16-bit G image, linearly quantized over the observed range.
inline Image green_heatmap(const MapSpec& f, const SliceSpec& s, int budget = 1000, unsigned threads = 0) {
    s.validate();
    require_regular(f);
    Image img;
    img.width = img.height = s.resolution;
    img.maxval = 65535;
    if (s.resolution == 0) return img;
    EscapeData e = escape_data(f);
    const auto n = static_cast<std::size_t>(s.resolution);
    std::vector<double> G(n * n);
    parallel_for(n, threads, [&](std::size_t row) {
        for (std::size_t col = 0; col < n; ++col)
            G[row * n + col] = green(f, e, s.point(static_cast<int>(row), static_cast<int>(col)), budget).value;
    });
    auto [lo, hi] = std::minmax_element(G.begin(), G.end());
    const double a = *lo, span = *hi - *lo;
    img.px.resize(n * n);
    for (std::size_t i = 0; i < n * n; ++i)
        img.px[i] = span > 0.0 ? static_cast<std::uint16_t>(std::lround((G[i] - a) / span * 65535.0)) : 0;
    return img;
}

/// Pixels of the 1-D map g on the zeta window that no attracting cycle
/// captures within the budget (255), all others 0.
inline Image julia_band_pi(const RationalMap& g, cplx center, double half_width, int resolution, const ClassifyOptions& opt = {},
                           unsigned threads = 0) {
    Image img;
    img.width = img.height = resolution;
    if (resolution == 0) return img;
    CycleReport cyc = attracting_cycles(g);
    SliceSpec s;
    s.center = center;
    s.half_width = half_width;
    s.resolution = resolution;
    img.px.assign(static_cast<std::size_t>(resolution) * resolution, 0);
    parallel_for(static_cast<std::size_t>(resolution), threads, [&](std::size_t row) {
        for (int col = 0; col < resolution; ++col) {
            int id = classify_pi(g, cyc, ProjectivePoint::from_chart(s.param(static_cast<int>(row), col)), opt);
            img.px[row * static_cast<std::size_t>(resolution) + static_cast<std::size_t>(col)] = id < 0 ? kPixelNearJPi : 0;
        }
    });
    return img;
}

/// Fraction of pixels where exactly one image has the value `v`.
inline double pixel_set_distance(const Image& a, const Image& b, std::uint16_t v = kPixelNearJPi) {
    if (a.width != b.width || a.height != b.height) throw Error(ErrorCode::Config, "image sizes differ");
    if (a.px.empty()) return 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.px.size(); ++i) diff += (a.px[i] == v) != (b.px[i] == v);
    return static_cast<double>(diff) / static_cast<double>(a.px.size());
}

inline std::size_t count_value(const Image& a, std::uint16_t v) {
    return static_cast<std::size_t>(std::count(a.px.begin(), a.px.end(), v));
}

/// PGM P5; 16-bit samples are big-endian.
inline void write_pgm(std::ostream& os, const Image& img) {
    os << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
    for (std::uint16_t v : img.px) {
        if (img.maxval > 255) {
            os.put(static_cast<char>(v >> 8));
            os.put(static_cast<char>(v & 0xFF));
        } else {
            os.put(static_cast<char>(v));
        }
    }
}

inline void write_pgm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Config, "cannot write '" + path + "'");
    write_pgm(out, img);
}

inline bool png_available() {
#ifdef C2DYN_HAVE_PNG
    return true;
#else
    return false;
#endif
}

inline void write_png(const std::string& path, const Image& img) {
#ifdef C2DYN_HAVE_PNG
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    im.width = static_cast<png_uint_32>(img.width);
    im.height = static_cast<png_uint_32>(img.height);
    if (img.maxval > 255) {
        // simplified API wants 16-bit samples in host order, linear
        im.format = PNG_FORMAT_LINEAR_Y;
        if (!png_image_write_to_file(&im, path.c_str(), 0, img.px.data(), 0, nullptr))
            throw Error(ErrorCode::Config, std::string("png: ") + im.message);
    } else {
        im.format = PNG_FORMAT_GRAY;
        std::vector<std::uint8_t> b(img.px.begin(), img.px.end());
        if (!png_image_write_to_file(&im, path.c_str(), 0, b.data(), 0, nullptr))
            throw Error(ErrorCode::Config, std::string("png: ") + im.message);
    }
#else
    (void)path;
    (void)img;
    throw Error(ErrorCode::Config, "built without PNG support");
#endif
}

} // namespace c2dyn
