#ifndef GBMOPT_IMAGING_HPP
#define GBMOPT_IMAGING_HPP

// Raster import/export and the image-to-density pipeline:
//   gray -> Gaussian blur -> median -> threshold + morphological open (mask)
//   -> keep masked values, zero the rest -> v = 1 - g / 255 -> strided downsample.
// Filters work on double-valued images with mirrored (reflect-101) borders.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "gbmopt/config.hpp"
#include "gbmopt/core.hpp"

namespace gbm {

struct RasterImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> data;

    void validate() const {
        if (channels != 1 && channels != 3) throw Error(ErrorKind::invalid_argument, "raster must have 1 or 3 channels");
        if (width == 0 || height == 0 || data.size() != width * height * channels)
            throw Error(ErrorKind::invalid_argument, "raster size does not match its data");
    }
};

/// Single-channel double image, row-major.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;

    double& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

namespace imaging_detail {

inline long reflect101(long i, long n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
}

inline void require_odd(int k, const char* what) {
    if (k < 1 || k % 2 == 0) throw Error(ErrorKind::invalid_argument, std::string(what) + " kernel size must be odd");
}

inline std::vector<double> gaussian_kernel(int k, double s) {
    require_odd(k, "Gaussian");
    if (!(s > 0.0)) throw Error(ErrorKind::invalid_argument, "Gaussian std must be positive");
    std::vector<double> w(static_cast<std::size_t>(k));
    const int c = k / 2;
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += w[i] = std::exp(-0.5 * (i - c) * (i - c) / (s * s));
    for (double& v : w) v /= sum;
    return w;
}

inline std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::floor(255.0 * std::clamp(v, 0.0, 1.0) + 0.5));
}

inline void skip_pnm_space(std::istream& in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string discard;
            std::getline(in, discard);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

inline std::size_t read_pnm_uint(std::istream& in, const std::string& path) {
    skip_pnm_space(in);
    long long v = -1;
    in >> v;
    if (!in || v <= 0) throw Error(ErrorKind::io, "malformed PNM header in '" + path + "'");
    return static_cast<std::size_t>(v);
}

}  // namespace imaging_detail

inline GrayImage to_gray(const RasterImage& img) {
    img.validate();
    GrayImage g{img.width, img.height, std::vector<double>(img.width * img.height)};
    for (std::size_t k = 0; k < g.values.size(); ++k) {
        if (img.channels == 1) {
            g.values[k] = img.data[k];
        } else {
            const double r = img.data[3 * k];
            const double gr = img.data[3 * k + 1];
            const double b = img.data[3 * k + 2];
            g.values[k] = std::floor(0.299 * r + 0.587 * gr + 0.114 * b + 0.5);
        }
    }
    return g;
}

/// Separable Gaussian blur with kernel size k (odd) and standard deviation s.
inline GrayImage gaussian_blur(const GrayImage& in, int k, double s) {
    using imaging_detail::reflect101;
    const auto w = imaging_detail::gaussian_kernel(k, s);
    const long c = k / 2;
    const long W = static_cast<long>(in.width);
    const long H = static_cast<long>(in.height);
    GrayImage tmp = in;
    for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
            double acc = 0.0;
            for (long t = -c; t <= c; ++t) acc += w[t + c] * in.at(reflect101(x + t, W), y);
            tmp.at(x, y) = acc;
        }
    GrayImage out = tmp;
    for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
            double acc = 0.0;
            for (long t = -c; t <= c; ++t) acc += w[t + c] * tmp.at(x, reflect101(y + t, H));
            out.at(x, y) = acc;
        }
    return out;
}

inline GrayImage median_filter(const GrayImage& in, int k) {
    using imaging_detail::reflect101;
    imaging_detail::require_odd(k, "median");
    const long c = k / 2;
    const long W = static_cast<long>(in.width);
    const long H = static_cast<long>(in.height);
    GrayImage out = in;
    std::vector<double> window(static_cast<std::size_t>(k * k));
    for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
            std::size_t m = 0;
            for (long dy = -c; dy <= c; ++dy)
                for (long dx = -c; dx <= c; ++dx) window[m++] = in.at(reflect101(x + dx, W), reflect101(y + dy, H));
            std::nth_element(window.begin(), window.begin() + static_cast<long>(m / 2), window.end());
            out.at(x, y) = window[m / 2];
        }
    return out;
}

/// Otsu threshold on the rounded 0..255 histogram; pixels strictly above the
/// returned level belong to the foreground class.
inline int otsu_threshold(const GrayImage& img) {
    std::array<double, 256> hist{};
    for (double v : img.values) hist[static_cast<std::size_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0))] += 1.0;
    const double total = static_cast<double>(img.values.size());
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
    double w0 = 0.0;
    double sum0 = 0.0;
    double best = -1.0;
    int level = 0;
    for (int t = 0; t < 256; ++t) {
        w0 += hist[t];
        sum0 += t * hist[t];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            level = t;
        }
    }
    return level;
}

/// Binary erosion (use_max = false) or dilation with a (2r+1)^2 square;
/// pixels outside the image are ignored.
inline std::vector<std::uint8_t> morph(const std::vector<std::uint8_t>& mask, std::size_t W, std::size_t H, int r,
                                       bool use_max) {
    std::vector<std::uint8_t> out(mask.size());
    const long R = r;
    for (long y = 0; y < static_cast<long>(H); ++y)
        for (long x = 0; x < static_cast<long>(W); ++x) {
            std::uint8_t v = use_max ? 0 : 1;
            for (long dy = -R; dy <= R; ++dy)
                for (long dx = -R; dx <= R; ++dx) {
                    const long xx = x + dx;
                    const long yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= static_cast<long>(W) || yy >= static_cast<long>(H)) continue;
                    const std::uint8_t m = mask[static_cast<std::size_t>(yy) * W + static_cast<std::size_t>(xx)];
                    v = use_max ? std::max(v, m) : std::min(v, m);
                }
            out[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)] = v;
        }
    return out;
}

inline std::vector<std::uint8_t> morphological_open(const std::vector<std::uint8_t>& mask, std::size_t W,
                                                    std::size_t H, int r) {
    if (r <= 0) return mask;
    return morph(morph(mask, W, H, r, false), W, H, r, true);
}

/// Image to normalised density field on a grid with spacing (hx, hy).
inline ScalarField preprocess(const RasterImage& img, const ImagingParams& p, double hx = 0.1, double hy = 0.1) {
    img.validate();
    const std::size_t out_nx = p.out_nx ? p.out_nx : img.width;
    const std::size_t out_ny = p.out_ny ? p.out_ny : img.height;
    if (img.width % out_nx != 0 || img.height % out_ny != 0)
        throw Error(ErrorKind::invalid_argument, "output size must divide the image size");
    imaging_detail::require_odd(p.gaussian_k, "Gaussian");
    imaging_detail::require_odd(p.median_k, "median");

    const GrayImage smoothed = median_filter(gaussian_blur(to_gray(img), p.gaussian_k, p.gaussian_s), p.median_k);
    const int level = p.threshold ? *p.threshold : otsu_threshold(smoothed);
    std::vector<std::uint8_t> mask(smoothed.values.size());
    for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = smoothed.values[k] > level ? 1 : 0;
    mask = morphological_open(mask, img.width, img.height, p.open_radius);

    const std::size_t sx = img.width / out_nx;
    const std::size_t sy = img.height / out_ny;
    ScalarField out(Grid2D{out_nx, out_ny, hx, hy});
    for (std::size_t j = 0; j < out_ny; ++j)
        for (std::size_t i = 0; i < out_nx; ++i) {
            const std::size_t k = (j * sy) * img.width + i * sx;
            const double g = mask[k] ? smoothed.values[k] : 0.0;
            out(i, j) = 1.0 - g / 255.0;
        }
    return out;
}

/// n-fold strided downsampling; spacing grows by n.
inline ScalarField downsample(const ScalarField& f, std::size_t n) {
    const Grid2D& g = f.grid();
    if (n == 0 || g.nx % n != 0 || g.ny % n != 0)
        throw Error(ErrorKind::invalid_argument, "downsample factor must divide the grid size");
    ScalarField out(Grid2D{g.nx / n, g.ny / n, g.hx * static_cast<double>(n), g.hy * static_cast<double>(n)});
    for (std::size_t j = 0; j < out.grid().ny; ++j)
        for (std::size_t i = 0; i < out.grid().nx; ++i) out(i, j) = f(i * n, j * n);
    return out;
}

inline ScalarField gaussian_filter(const ScalarField& f, int k, double s) {
    GrayImage img{f.grid().nx, f.grid().ny, f.data()};
    return ScalarField(f.grid(), gaussian_blur(img, k, s).values);
}

/// Blur after downsampling: G_{k,s}(D_n(f)).
inline ScalarField perturb(const ScalarField& f, int k, double s, std::size_t n) {
    return gaussian_filter(downsample(f, n), k, s);
}

/// Anisotropic total variation sum |dx f| + |dy f| over neighbour pairs.
inline double total_variation(const ScalarField& f) {
    const Grid2D& g = f.grid();
    double tv = 0.0;
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) {
            if (i + 1 < g.nx) tv += std::abs(f(i + 1, j) - f(i, j));
            if (j + 1 < g.ny) tv += std::abs(f(i, j + 1) - f(i, j));
        }
    return tv;
}

inline RasterImage import_raster(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open image '" + path + "'");
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (!in || (magic != "P5" && magic != "P6")) throw Error(ErrorKind::io, "'" + path + "' is not a binary PGM/PPM");
    RasterImage img;
    img.channels = magic == "P6" ? 3 : 1;
    img.width = imaging_detail::read_pnm_uint(in, path);
    img.height = imaging_detail::read_pnm_uint(in, path);
    const std::size_t maxval = imaging_detail::read_pnm_uint(in, path);
    if (maxval > 255) throw Error(ErrorKind::io, "only 8-bit PNM images are supported");
    const int sep = in.get();
    if (sep != ' ' && sep != '\n' && sep != '\r' && sep != '\t') throw Error(ErrorKind::io, "malformed PNM header");
    img.data.resize(img.width * img.height * img.channels);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!in) throw Error(ErrorKind::io, "truncated image data in '" + path + "'");
    if (maxval != 255)
        for (auto& v : img.data) v = static_cast<std::uint8_t>((static_cast<unsigned>(v) * 255u + maxval / 2) / maxval);
    return img;
}

inline void write_raster(const RasterImage& img, const std::string& path) {
    img.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write image '" + path + "'");
    out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for '" + path + "'");
}

/// Quantises a [0, 1] field to 8 bits with round-half-up; values are clamped first.
inline RasterImage field_to_raster(const ScalarField& f) {
    RasterImage img{f.grid().nx, f.grid().ny, 1, std::vector<std::uint8_t>(f.size())};
    for (std::size_t k = 0; k < f.size(); ++k) img.data[k] = imaging_detail::quantize(f[k]);
    return img;
}

inline void export_pgm(const ScalarField& f, const std::string& path) { write_raster(field_to_raster(f), path); }

}  // namespace gbm

#endif
