#ifndef FEDMED_IMAGE_HPP
#define FEDMED_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fedmed/common.hpp"

// Axis convention used by every transform in this file:
//   x = column index, increasing rightward; y = row index, increasing downward.
// Rotation angles are counterclockwise in this (x right, y down) frame.
// Out-of-support samples take InterpSpec::fill_value. Nearest rounding is
// half-away-from-zero. All transforms preserve the input dimensions.

namespace fedmed {

/// Single-channel 2D image with a declared intensity interval.
class Slice2D {
public:
    Slice2D() = default;

    Slice2D(int height, int width, ValueRange range, double init_value)
        : h_(height), w_(width), range_(range),
          px_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), init_value) {
        check_dims(height, width);
        validate();
    }

    Slice2D(int height, int width, ValueRange range, std::vector<double> pixels)
        : h_(height), w_(width), range_(range), px_(std::move(pixels)) {
        check_dims(height, width);
        if (px_.size() != static_cast<std::size_t>(h_) * static_cast<std::size_t>(w_))
            throw std::invalid_argument("Slice2D: pixel count does not match dimensions");
        validate();
    }

    int height() const { return h_; }
    int width() const { return w_; }
    const ValueRange& value_range() const { return range_; }

    double at(int row, int col) const { return px_[idx(row, col)]; }
    double& at(int row, int col) { return px_[idx(row, col)]; }

    const std::vector<double>& pixels() const { return px_; }
    std::vector<double>& pixels() { return px_; }

    bool operator==(const Slice2D&) const = default;

private:
    static void check_dims(int h, int w) {
        if (h < 8 || w < 8)
            throw std::invalid_argument("Slice2D: height and width must be >= 8, got " +
                                        std::to_string(h) + "x" + std::to_string(w));
    }

    // Finite and inside the declared range, with a 1-ulp-scale tolerance so
    // exact-endpoint remaps do not trip the check.
    void validate() const {
        const double tol = 1e-9 * std::max(1.0, std::abs(range_.span()));
        for (double v : px_) {
            if (!std::isfinite(v))
                throw std::invalid_argument("Slice2D: non-finite pixel value");
            if (v < range_.lo - tol || v > range_.hi + tol)
                throw std::invalid_argument("Slice2D: pixel value " + std::to_string(v) +
                                            " outside declared range [" + std::to_string(range_.lo) +
                                            ", " + std::to_string(range_.hi) + "]");
        }
    }

    std::size_t idx(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(w_) +
               static_cast<std::size_t>(col);
    }

    int h_ = 0;
    int w_ = 0;
    ValueRange range_;
    std::vector<double> px_;
};

/// Continuous affine distortion parameters.
struct AffineParams {
    double rotation_deg = 0.0; // counterclockwise in the x-right/y-down frame
    double translate_x = 0.0;  // pixels, rightward
    double translate_y = 0.0;  // pixels, downward
    double scale_ratio = 1.0;  // > 0

    bool is_identity() const {
        return rotation_deg == 0.0 && translate_x == 0.0 && translate_y == 0.0 &&
               scale_ratio == 1.0;
    }

    static AffineParams identity() { return {}; }
};

enum class Interp { nearest, bilinear };

struct InterpSpec {
    Interp method = Interp::bilinear;
    double fill_value = 0.0; // used for out-of-support samples

    static InterpSpec nearest_fill(double fill) { return {Interp::nearest, fill}; }
    static InterpSpec bilinear_fill(double fill) { return {Interp::bilinear, fill}; }
};

/// Normalize an angle into [-180, 180].
inline double normalize_degrees(double deg) {
    double d = std::fmod(deg, 360.0);
    if (d > 180.0) d -= 360.0;
    if (d < -180.0) d += 360.0;
    return d;
}

namespace detail {

inline double sample_at(const Slice2D& img, double xs, double ys, const InterpSpec& interp) {
    const int h = img.height(), w = img.width();
    if (interp.method == Interp::nearest) {
        // half-away-from-zero rounding
        const long xi = std::lround(xs);
        const long yi = std::lround(ys);
        if (xi < 0 || xi >= w || yi < 0 || yi >= h) return interp.fill_value;
        return img.at(static_cast<int>(yi), static_cast<int>(xi));
    }
    // bilinear: anything outside the pixel-center support is fill
    if (xs < 0.0 || xs > static_cast<double>(w - 1) || ys < 0.0 || ys > static_cast<double>(h - 1))
        return interp.fill_value;
    const int x0 = static_cast<int>(std::floor(xs));
    const int y0 = static_cast<int>(std::floor(ys));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = xs - x0;
    const double fy = ys - y0;
    const double v00 = img.at(y0, x0), v01 = img.at(y0, x1);
    const double v10 = img.at(y1, x0), v11 = img.at(y1, x1);
    const double top = v00 * (1.0 - fx) + v01 * fx;
    const double bot = v10 * (1.0 - fx) + v11 * fx;
    return top * (1.0 - fy) + bot * fy;
}

// Generic inverse-map resampler: for each output pixel, `src` yields the
// source coordinates (xs, ys) in the input frame.
template <class SrcFn>
Slice2D resample(const Slice2D& img, const InterpSpec& interp, SrcFn&& src) {
    Slice2D out(img.height(), img.width(), img.value_range(), interp.fill_value);
    for (int row = 0; row < img.height(); ++row) {
        for (int col = 0; col < img.width(); ++col) {
            const auto [xs, ys] = src(static_cast<double>(col), static_cast<double>(row));
            out.at(row, col) = sample_at(img, xs, ys, interp);
        }
    }
    return out;
}

} // namespace detail

/// Rotate about the image center. 0 after normalization is an exact copy.
inline Slice2D rotate(const Slice2D& img, double degrees, const InterpSpec& interp) {
    if (!std::isfinite(degrees))
        throw std::invalid_argument("rotate: non-finite angle");
    const double deg = normalize_degrees(degrees);
    if (deg == 0.0) return img;
    const double rad = deg * M_PI / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cx = 0.5 * (img.width() - 1);
    const double cy = 0.5 * (img.height() - 1);
    // inverse map: rotate the output coordinate by -deg
    return detail::resample(img, interp, [&](double xo, double yo) {
        const double dx = xo - cx, dy = yo - cy;
        return std::pair{cx + c * dx + s * dy, cy - s * dx + c * dy};
    });
}

/// Shift content by (dx, dy): out(x, y) = in(x - dx, y - dy).
inline Slice2D translate(const Slice2D& img, double dx, double dy, const InterpSpec& interp) {
    if (!std::isfinite(dx) || !std::isfinite(dy))
        throw std::invalid_argument("translate: non-finite offset");
    if (dx == 0.0 && dy == 0.0) return img;
    return detail::resample(img, interp,
                            [&](double xo, double yo) { return std::pair{xo - dx, yo - dy}; });
}

/// Scale about the image center by `ratio`, keeping the original canvas:
/// ratio > 1 magnifies (implicit center crop), ratio < 1 shrinks (fill pad).
inline Slice2D rescale(const Slice2D& img, double ratio, const InterpSpec& interp) {
    if (!(ratio > 0.0) || !std::isfinite(ratio))
        throw std::invalid_argument("rescale: ratio must be finite and > 0");
    if (ratio == 1.0) return img;
    const double cx = 0.5 * (img.width() - 1);
    const double cy = 0.5 * (img.height() - 1);
    return detail::resample(img, interp, [&](double xo, double yo) {
        return std::pair{cx + (xo - cx) / ratio, cy + (yo - cy) / ratio};
    });
}

/// Fixed composition order: rotate, then translate, then rescale.
inline Slice2D apply_affine(const Slice2D& img, const AffineParams& p, const InterpSpec& interp) {
    return rescale(translate(rotate(img, p.rotation_deg, interp), p.translate_x, p.translate_y,
                             interp),
                   p.scale_ratio, interp);
}

/// Central window; odd differences bias toward the top-left.
inline Slice2D center_crop(const Slice2D& img, int out_h, int out_w) {
    if (out_h > img.height() || out_w > img.width())
        throw std::invalid_argument("center_crop: target " + std::to_string(out_h) + "x" +
                                    std::to_string(out_w) + " exceeds source " +
                                    std::to_string(img.height()) + "x" +
                                    std::to_string(img.width()));
    const int r0 = (img.height() - out_h) / 2;
    const int c0 = (img.width() - out_w) / 2;
    Slice2D out(out_h, out_w, img.value_range(), img.value_range().lo);
    for (int r = 0; r < out_h; ++r)
        for (int c = 0; c < out_w; ++c) out.at(r, c) = img.at(r0 + r, c0 + c);
    return out;
}

/// Linear intensity remap taking src endpoints to dst endpoints.
inline Slice2D normalize(const Slice2D& img, ValueRange src, ValueRange dst) {
    if (src.degenerate())
        throw std::invalid_argument("normalize: degenerate source range");
    const double scale = dst.span() / src.span();
    Slice2D out(img.height(), img.width(), dst, dst.lo);
    const auto& in = img.pixels();
    auto& px = out.pixels();
    for (std::size_t i = 0; i < in.size(); ++i) px[i] = (in[i] - src.lo) * scale + dst.lo;
    return out;
}

} // namespace fedmed

#endif // FEDMED_IMAGE_HPP
