#include "mif/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mif/core/error.hpp"
#include "mif/core/kernels.hpp"

namespace mif {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Mirror an index into [0, n-1]; edge pixels repeat (reflect at pixel borders).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

}  // namespace

double Image::bilinear(double x, double y) const {
    const int x0 = clampi(int(std::floor(x)), 0, width - 1);
    const int y0 = clampi(int(std::floor(y)), 0, height - 1);
    const int x1 = clampi(x0 + 1, 0, width - 1);
    const int y1 = clampi(y0 + 1, 0, height - 1);
    const double fx = std::clamp(x - std::floor(x), 0.0, 1.0);
    const double fy = std::clamp(y - std::floor(y), 0.0, 1.0);
    const double top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
    const double bot = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
    return top * (1 - fy) + bot * fy;
}

double Image::bilinear_reflect(double x, double y) const {
    const int xf = int(std::floor(x));
    const int yf = int(std::floor(y));
    const double fx = x - xf;
    const double fy = y - yf;
    const int x0 = reflect_index(xf, width);
    const int x1 = reflect_index(xf + 1, width);
    const int y0 = reflect_index(yf, height);
    const int y1 = reflect_index(yf + 1, height);
    const double top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
    const double bot = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
    return top * (1 - fy) + bot * fy;
}

void Image::clamp01() {
    for (double& v : px) v = std::clamp(v, 0.0, 1.0);
}

Image load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image: " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw FormatError(path + ": expected binary PGM (P5)");
    auto next_token = [&is, &path]() {
        std::string tok;
        for (;;) {
            if (!(is >> tok)) throw FormatError(path + ": truncated PGM header");
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
            return tok;
        }
    };
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw FormatError(path + ": unsupported PGM geometry");
    is.get();  // single whitespace before payload
    std::vector<unsigned char> buf(std::size_t(w) * h);
    is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (std::size_t(is.gcount()) != buf.size()) throw FormatError(path + ": truncated PGM payload");
    Image img(w, h);
    const double inv = 1.0 / maxval;
    for (std::size_t i = 0; i < buf.size(); ++i) img.px[i] = buf[i] * inv;
    return img;
}

void save_pgm(const std::string& path, const Image& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> buf(img.px.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const double v = std::clamp(img.px[i], 0.0, 1.0);
        buf[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!os) throw IoError("write failed: " + path);
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> k(std::size_t(radius) + 1);
    double sum = 0.0;
    for (int i = 0; i <= radius; ++i) {
        k[i] = std::exp(-0.5 * (double(i) * i) / (sigma * sigma));
        sum += (i == 0) ? k[i] : 2.0 * k[i];
    }
    for (double& v : k) v /= sum;

    const int w = img.width, h = img.height;
    Image tmp(w, h), out(w, h);
    // horizontal pass
    kern::parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            double acc = k[0] * img.at(x, y);
            for (int i = 1; i <= radius; ++i)
                acc += k[i] * (img.at(reflect_index(x - i, w), y) +
                               img.at(reflect_index(x + i, w), y));
            tmp.at(x, y) = acc;
        }
    });
    // vertical pass
    kern::parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            double acc = k[0] * tmp.at(x, y);
            for (int i = 1; i <= radius; ++i)
                acc += k[i] * (tmp.at(x, reflect_index(y - i, h)) +
                               tmp.at(x, reflect_index(y + i, h)));
            out.at(x, y) = acc;
        }
    });
    return out;
}

Image gradient_magnitude(const Image& img) {
    const int w = img.width, h = img.height;
    Image out(w, h);
    kern::parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            const double gx = 0.5 * (img.at(reflect_index(x + 1, w), y) -
                                     img.at(reflect_index(x - 1, w), y));
            const double gy = 0.5 * (img.at(x, reflect_index(y + 1, h)) -
                                     img.at(x, reflect_index(y - 1, h)));
            out.at(x, y) = std::sqrt(gx * gx + gy * gy);
        }
    });
    return out;
}

Canvas::Canvas(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width(w), height(h), rgb(std::size_t(w) * h * 3) {
    for (std::size_t i = 0; i < rgb.size(); i += 3) {
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
}

Canvas Canvas::from_gray(const Image& img) {
    Canvas c(img.width, img.height);
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(img.px[i], 0.0, 1.0) * 255.0));
        c.rgb[3 * i] = v;
        c.rgb[3 * i + 1] = v;
        c.rgb[3 * i + 2] = v;
    }
    return c;
}

void Canvas::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const std::size_t i = 3 * (std::size_t(y) * width + x);
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
}

void Canvas::line(double x0, double y0, double x1, double y1,
                  std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const double dx = x1 - x0, dy = y1 - y0;
    const int steps = std::max(1, int(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
    for (int i = 0; i <= steps; ++i) {
        const double t = double(i) / steps;
        set(int(std::lround(x0 + t * dx)), int(std::lround(y0 + t * dy)), r, g, b);
    }
}

void Canvas::disc(double cx, double cy, double radius,
                  std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int lo = int(std::floor(-radius)), hi = int(std::ceil(radius));
    for (int dy = lo; dy <= hi; ++dy)
        for (int dx = lo; dx <= hi; ++dx)
            if (dx * dx + dy * dy <= radius * radius)
                set(int(std::lround(cx)) + dx, int(std::lround(cy)) + dy, r, g, b);
}

namespace {

// 3x5 glyphs, row-major bits; enough for numeric axis labels.
struct Glyph {
    char c;
    std::uint16_t bits;
};

constexpr Glyph kGlyphs[] = {
    {'0', 0b111101101101111}, {'1', 0b010110010010111}, {'2', 0b111001111100111},
    {'3', 0b111001111001111}, {'4', 0b101101111001001}, {'5', 0b111100111001111},
    {'6', 0b111100111101111}, {'7', 0b111001010010010}, {'8', 0b111101111101111},
    {'9', 0b111101111001111}, {'.', 0b000000000000010}, {'-', 0b000000111000000},
    {'e', 0b000111110100111}, {'+', 0b000010111010000}, {' ', 0b000000000000000},
    {'s', 0b011100010001110}, {'r', 0b000110101100100}, {'m', 0b000110111101101},
    {'k', 0b100101110101101}, {'l', 0b100100100100011}, {'a', 0b000011101101011},
};

const Glyph* find_glyph(char c) {
    for (const auto& g : kGlyphs)
        if (g.c == c) return &g;
    return nullptr;
}

}  // namespace

void Canvas::text(int x, int y, const std::string& s,
                  std::uint8_t r, std::uint8_t g, std::uint8_t b, int scale) {
    int cx = x;
    for (char ch : s) {
        const Glyph* gl = find_glyph(ch);
        if (gl) {
            for (int row = 0; row < 5; ++row)
                for (int col = 0; col < 3; ++col)
                    if (gl->bits >> ((4 - row) * 3 + (2 - col)) & 1)
                        for (int sy = 0; sy < scale; ++sy)
                            for (int sx = 0; sx < scale; ++sx)
                                set(cx + col * scale + sx, y + row * scale + sy, r, g, b);
        }
        cx += 4 * scale;
    }
}

void save_ppm(const std::string& path, const Canvas& c) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "P6\n" << c.width << " " << c.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(c.rgb.data()), std::streamsize(c.rgb.size()));
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace mif
