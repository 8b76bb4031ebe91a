#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mif {

// Grayscale raster, values in [0,1], row-major with y*width + x indexing.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> px;

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h), px(std::size_t(w) * h, fill) {}

    double at(int x, int y) const { return px[std::size_t(y) * width + x]; }
    double& at(int x, int y) { return px[std::size_t(y) * width + x]; }

    // Bilinear sample with border clamp.
    double bilinear(double x, double y) const;
    // Bilinear sample with mirrored extension outside the image.
    double bilinear_reflect(double x, double y) const;

    void clamp01();
};

Image load_pgm(const std::string& path);
void save_pgm(const std::string& path, const Image& img);

Image gaussian_blur(const Image& img, double sigma);
Image gradient_magnitude(const Image& img);

// RGB canvas for match visualizations and plot artifacts.
struct Canvas {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Canvas() = default;
    Canvas(int w, int h, std::uint8_t r = 255, std::uint8_t g = 255, std::uint8_t b = 255);
    static Canvas from_gray(const Image& img);

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
    void line(double x0, double y0, double x1, double y1,
              std::uint8_t r, std::uint8_t g, std::uint8_t b);
    void disc(double cx, double cy, double radius,
              std::uint8_t r, std::uint8_t g, std::uint8_t b);
    // 3x5 bitmap glyphs: digits, '.', '-', and a few letters for axis labels.
    void text(int x, int y, const std::string& s,
              std::uint8_t r, std::uint8_t g, std::uint8_t b, int scale = 1);
};

void save_ppm(const std::string& path, const Canvas& c);

}  // namespace mif
