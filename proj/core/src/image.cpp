#include "wastebench/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "wastebench/errors.hpp"

namespace wastebench {

namespace {

// Rec.601 luma in [0,255] as double.
double luma(const std::uint8_t* px) {
    return 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
}

std::uint8_t clamp_round(double v) {
    if (v <= 0.0) return 0;
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v));
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        fail(ErrorCode::MissingFile, "image file not found: " + path.string());

    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        std::string msg = png.message;
        png_image_free(&png);
        fail(ErrorCode::UndecodableImage, path.string() + ": " + msg);
    }
    png.format = PNG_FORMAT_RGB;
    Image out(static_cast<int>(png.height), static_cast<int>(png.width), 3);
    if (!png_image_finish_read(&png, nullptr, out.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        fail(ErrorCode::UndecodableImage, path.string() + ": " + msg);
    }
    return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
    if (image.empty()) fail(ErrorCode::IOFailure, "write_png: empty image");
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = image.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, image.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        fail(ErrorCode::IOFailure, "write_png " + path.string() + ": " + msg);
    }
}

Image resize_bilinear(const Image& image, int out_height, int out_width) {
    if (image.height() == out_height && image.width() == out_width) return image;
    const int c = image.channels();
    Image out(out_height, out_width, c);
    const double sy = static_cast<double>(image.height()) / out_height;
    const double sx = static_cast<double>(image.width()) / out_width;
    for (int y = 0; y < out_height; ++y) {
        double src_y = (y + 0.5) * sy - 0.5;
        src_y = std::clamp(src_y, 0.0, static_cast<double>(image.height() - 1));
        const int y0 = static_cast<int>(src_y);
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double fy = src_y - y0;
        for (int x = 0; x < out_width; ++x) {
            double src_x = (x + 0.5) * sx - 0.5;
            src_x = std::clamp(src_x, 0.0, static_cast<double>(image.width() - 1));
            const int x0 = static_cast<int>(src_x);
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double fx = src_x - x0;
            for (int ch = 0; ch < c; ++ch) {
                const double top = image.at(y0, x0, ch) * (1 - fx) + image.at(y0, x1, ch) * fx;
                const double bot = image.at(y1, x0, ch) * (1 - fx) + image.at(y1, x1, ch) * fx;
                out.at(y, x, ch) = clamp_round(top * (1 - fy) + bot * fy);
            }
        }
    }
    return out;
}

Image rotate_about_center(const Image& image, double degrees) {
    if (degrees == 0.0) return image;
    const double rad = degrees * M_PI / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cx = (image.width() - 1) / 2.0;
    const double cy = (image.height() - 1) / 2.0;
    const int c = image.channels();
    Image out(image.height(), image.width(), c);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            // inverse map: rotate by -degrees
            const double dx = x - cx, dy = y - cy;
            const double src_x = cx + cs * dx + sn * dy;
            const double src_y = cy - sn * dx + cs * dy;
            if (src_x < 0 || src_x > image.width() - 1 || src_y < 0 || src_y > image.height() - 1)
                continue;  // black fill
            const int x0 = static_cast<int>(std::floor(src_x));
            const int y0 = static_cast<int>(std::floor(src_y));
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const int y1 = std::min(y0 + 1, image.height() - 1);
            const double fx = src_x - x0, fy = src_y - y0;
            for (int ch = 0; ch < c; ++ch) {
                const double top = image.at(y0, x0, ch) * (1 - fx) + image.at(y0, x1, ch) * fx;
                const double bot = image.at(y1, x0, ch) * (1 - fx) + image.at(y1, x1, ch) * fx;
                out.at(y, x, ch) = clamp_round(top * (1 - fy) + bot * fy);
            }
        }
    }
    return out;
}

Image flip_horizontal(const Image& image) {
    Image out(image.height(), image.width(), image.channels());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < image.channels(); ++c)
                out.at(y, x, c) = image.at(y, image.width() - 1 - x, c);
    return out;
}

Image flip_vertical(const Image& image) {
    Image out(image.height(), image.width(), image.channels());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < image.channels(); ++c)
                out.at(y, x, c) = image.at(image.height() - 1 - y, x, c);
    return out;
}

Image adjust_brightness(const Image& image, double factor) {
    if (factor == 1.0) return image;
    Image out(image.height(), image.width(), image.channels());
    const std::uint8_t* src = image.data();
    std::uint8_t* dst = out.data();
    const std::size_t n =
        static_cast<std::size_t>(image.height()) * image.width() * image.channels();
    for (std::size_t i = 0; i < n; ++i) dst[i] = clamp_round(src[i] * factor);
    return out;
}

Image adjust_contrast(const Image& image, double factor) {
    if (factor == 1.0) return image;
    // pivot on the mean gray level of the whole frame
    double mean = 0;
    const std::size_t px_count = static_cast<std::size_t>(image.height()) * image.width();
    for (std::size_t p = 0; p < px_count; ++p) {
        const std::uint8_t* px = image.data() + p * image.channels();
        mean += image.channels() == 3 ? luma(px) : static_cast<double>(px[0]);
    }
    mean /= static_cast<double>(px_count);
    Image out(image.height(), image.width(), image.channels());
    const std::size_t n = px_count * image.channels();
    for (std::size_t i = 0; i < n; ++i)
        out.data()[i] = clamp_round(mean + (image.data()[i] - mean) * factor);
    return out;
}

Image adjust_saturation(const Image& image, double factor) {
    if (factor == 1.0 || image.channels() == 1) return image;
    Image out(image.height(), image.width(), 3);
    const std::size_t px_count = static_cast<std::size_t>(image.height()) * image.width();
    for (std::size_t p = 0; p < px_count; ++p) {
        const std::uint8_t* src = image.data() + p * 3;
        std::uint8_t* dst = out.data() + p * 3;
        const double l = luma(src);
        for (int c = 0; c < 3; ++c) dst[c] = clamp_round(l + (src[c] - l) * factor);
    }
    return out;
}

Image crop(const Image& image, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > image.width() || y + h > image.height())
        fail(ErrorCode::InvalidCropWindow,
             "crop window (" + std::to_string(x) + "," + std::to_string(y) + "," +
                 std::to_string(w) + "x" + std::to_string(h) + ") outside " +
                 std::to_string(image.width()) + "x" + std::to_string(image.height()) + " frame");
    if (x == 0 && y == 0 && w == image.width() && h == image.height()) return image;
    Image out(h, w, image.channels());
    for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx)
            for (int c = 0; c < image.channels(); ++c)
                out.at(yy, xx, c) = image.at(y + yy, x + xx, c);
    return out;
}

Image to_rgb(const Image& image) {
    if (image.channels() == 3) return image;
    Image out(image.height(), image.width(), 3);
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) {
            const std::uint8_t v = image.at(y, x, 0);
            out.at(y, x, 0) = v;
            out.at(y, x, 1) = v;
            out.at(y, x, 2) = v;
        }
    return out;
}

}  // namespace wastebench
