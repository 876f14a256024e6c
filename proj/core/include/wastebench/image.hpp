#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace wastebench {

// 8-bit interleaved raster, row-major HWC. Channels is 1 or 3.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels)
        : height_(height), width_(width), channels_(channels),
          pixels_(static_cast<std::size_t>(height) * width * channels, 0) {}

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    bool empty() const { return pixels_.empty(); }

    std::uint8_t* data() { return pixels_.data(); }
    const std::uint8_t* data() const { return pixels_.data(); }

    std::uint8_t& at(int y, int x, int c) {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    bool operator==(const Image& other) const = default;

private:
    int height_ = 0, width_ = 0, channels_ = 0;
    std::vector<std::uint8_t> pixels_;
};

// PNG codec (libpng). Decode always yields 3-channel RGB; 16-bit depth,
// palettes and alpha are converted/stripped. Throws MissingFile,
// UndecodableImage, IOFailure.
Image read_png(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);

// Direct (non aspect-preserving) bilinear resize; identity when sizes match.
Image resize_bilinear(const Image& image, int out_height, int out_width);

// Rotation about the pixel center ((w-1)/2, (h-1)/2): output pixel p takes
// the bilinear sample of the input at c + R(-deg) * (p - c), where
// R(a) = [[cos a, -sin a], [sin a, cos a]] acts on (x, y) pixel coordinates.
// Samples falling outside the frame read as black.
Image rotate_about_center(const Image& image, double degrees);

Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);

// Factor 1.0 is an exact no-op for all three.
Image adjust_brightness(const Image& image, double factor);
Image adjust_contrast(const Image& image, double factor);
Image adjust_saturation(const Image& image, double factor);

Image crop(const Image& image, int x, int y, int w, int h);

// Grayscale replicated across three channels; 3-channel input is returned as-is.
Image to_rgb(const Image& image);

}  // namespace wastebench
