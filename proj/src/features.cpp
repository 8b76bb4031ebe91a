#include "mif/features.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "mif/core/error.hpp"
#include "mif/core/kernels.hpp"
#include "mif/core/rng.hpp"
#include "mif/core/tensor_file.hpp"

namespace mif {

namespace {

Image harris_response(const Image& img) {
    const int w = img.width, h = img.height;
    Image ix(w, h), iy(w, h);
    kern::parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            const int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
            const int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
            ix.at(x, y) = 0.5 * (img.at(xp, y) - img.at(xm, y));
            iy.at(x, y) = 0.5 * (img.at(x, yp) - img.at(x, ym));
        }
    });
    Image ixx(w, h), iyy(w, h), ixy(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            ixx.at(x, y) = ix.at(x, y) * ix.at(x, y);
            iyy.at(x, y) = iy.at(x, y) * iy.at(x, y);
            ixy.at(x, y) = ix.at(x, y) * iy.at(x, y);
        }
    const double sigma = 1.5;
    ixx = gaussian_blur(ixx, sigma);
    iyy = gaussian_blur(iyy, sigma);
    ixy = gaussian_blur(ixy, sigma);
    Image resp(w, h);
    kern::parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            const double a = ixx.at(x, y), b = iyy.at(x, y), c = ixy.at(x, y);
            const double det = a * b - c * c;
            const double tr = a + b;
            resp.at(x, y) = det - 0.04 * tr * tr;
        }
    });
    return resp;
}

}  // namespace

std::pair<KeypointSet, FeatureSet> detect_keypoints_synthetic(const Image& img, int max_kpts,
                                                              double nms_radius) {
    if (max_kpts < 1) throw ConfigError("max_kpts must be >= 1");
    for (double v : img.px)
        if (!std::isfinite(v)) throw NonFiniteData("image contains non-finite values");

    const Image resp = harris_response(img);
    double max_resp = 0.0;
    for (double v : resp.px) max_resp = std::max(max_resp, v);
    if (max_resp <= 1e-12) throw NoKeypoints("flat response, no corners detected");

    struct Cand {
        double score;
        int x, y;
    };
    std::vector<Cand> cands;
    const double floor_resp = 1e-6 * max_resp;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double v = resp.at(x, y);
            if (v > floor_resp) cands.push_back({v, x, y});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });

    const double r2 = nms_radius * nms_radius;
    std::vector<Cand> kept;
    for (const Cand& c : cands) {
        bool blocked = false;
        for (const Cand& k : kept) {
            const double dx = c.x - k.x, dy = c.y - k.y;
            if (dx * dx + dy * dy < r2) {
                blocked = true;
                break;
            }
        }
        if (!blocked) {
            kept.push_back(c);
            if (int(kept.size()) >= max_kpts) break;
        }
    }

    KeypointSet kp;
    kp.width = img.width;
    kp.height = img.height;
    kp.coords = Mat(int(kept.size()), 2);
    kp.scores.resize(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        kp.coords(int(i), 0) = kept[i].x;
        kp.coords(int(i), 1) = kept[i].y;
        kp.scores[i] = kept[i].score / max_resp;
    }

    // 8x8 patch descriptor, offsets -3..+4, zero outside the image
    FeatureSet fs;
    fs.role = FeatureSet::Role::base;
    fs.descriptors = Mat(kp.count(), 64);
    kern::parallel_for(kp.count(), [&](int i) {
        const int cx = int(kp.coords(i, 0)), cy = int(kp.coords(i, 1));
        double* d = fs.descriptors.row(i);
        int t = 0;
        double norm2 = 0.0;
        for (int dy = -3; dy <= 4; ++dy)
            for (int dx = -3; dx <= 4; ++dx, ++t) {
                const int x = cx + dx, y = cy + dy;
                const double v = (x >= 0 && y >= 0 && x < img.width && y < img.height)
                                     ? img.at(x, y)
                                     : 0.0;
                d[t] = v;
                norm2 += v * v;
            }
        if (norm2 < 1e-24) {
            for (int j = 0; j < 64; ++j) d[j] = 0.125;  // unit-norm fallback
        } else {
            const double inv = 1.0 / std::sqrt(norm2);
            for (int j = 0; j < 64; ++j) d[j] *= inv;
        }
    });
    return {std::move(kp), std::move(fs)};
}

std::vector<Image> semantic_channels(const Image& img, int depth) {
    if (depth < 1) throw ConfigError("semantic depth must be >= 1");
    std::vector<Image> channels;
    channels.reserve(2 * std::size_t(depth));
    double sigma = 1.0;
    for (int level = 0; level < depth; ++level, sigma *= 2.0) {
        Image blurred = gaussian_blur(img, sigma);
        channels.push_back(blurred);
        channels.push_back(gradient_magnitude(blurred));
    }
    // standardize each channel over the image
    for (Image& c : channels) {
        double mean = std::accumulate(c.px.begin(), c.px.end(), 0.0) / double(c.px.size());
        double var = 0.0;
        for (double v : c.px) var += (v - mean) * (v - mean);
        var /= double(c.px.size());
        const double inv = 1.0 / std::sqrt(var + 1e-12);
        for (double& v : c.px) v = (v - mean) * inv;
    }
    return channels;
}

DenseFeatureMap synthetic_semantic_map(const Image& img, int depth, std::uint64_t proj_seed,
                                       int out_dim) {
    std::vector<Image> channels = semantic_channels(img, depth);
    // blurred-intensity channels flip sign under inversion; downweight them so
    // the contrast-robust gradient channels dominate the projection
    constexpr double kIntensityWeight = 0.25;
    for (std::size_t c = 0; c < channels.size(); c += 2)
        for (double& v : channels[c].px) v *= kIntensityWeight;

    const int n_chan = int(channels.size());
    Rng rng(proj_seed);
    Mat proj(n_chan, out_dim);
    const double scale = 1.0 / std::sqrt(double(n_chan));
    for (int c = 0; c < n_chan; ++c)
        for (int d = 0; d < out_dim; ++d) proj(c, d) = rng.normal(0.0, scale);

    DenseFeatureMap map;
    map.width = img.width;
    map.height = img.height;
    map.dim = out_dim;
    map.stride = 1.0;
    map.data.assign(std::size_t(img.width) * img.height * out_dim, 0.0);
    map.provenance = {"synthetic", -1, -1, depth, proj_seed};
    kern::parallel_for(img.height, [&](int y) {
        for (int x = 0; x < img.width; ++x) {
            double* out = map.at(x, y);
            for (int c = 0; c < n_chan; ++c) {
                const double v = channels[c].at(x, y);
                const double* p = proj.row(c);
                for (int d = 0; d < out_dim; ++d) out[d] += v * p[d];
            }
        }
    });
    return map;
}

FeatureSet sample_dense_at_keypoints(const DenseFeatureMap& map, const KeypointSet& kpts) {
    FeatureSet fs;
    fs.role = FeatureSet::Role::latent;
    fs.descriptors = Mat(kpts.count(), map.dim);
    kern::parallel_for(kpts.count(), [&](int i) {
        const double mx = kpts.coords(i, 0) / map.stride;
        const double my = kpts.coords(i, 1) / map.stride;
        const int x0 = std::clamp(int(std::floor(mx)), 0, map.width - 1);
        const int y0 = std::clamp(int(std::floor(my)), 0, map.height - 1);
        const int x1 = std::min(x0 + 1, map.width - 1);
        const int y1 = std::min(y0 + 1, map.height - 1);
        const double fx = std::clamp(mx - std::floor(mx), 0.0, 1.0);
        const double fy = std::clamp(my - std::floor(my), 0.0, 1.0);
        const double* p00 = map.at(x0, y0);
        const double* p10 = map.at(x1, y0);
        const double* p01 = map.at(x0, y1);
        const double* p11 = map.at(x1, y1);
        double* out = fs.descriptors.row(i);
        for (int d = 0; d < map.dim; ++d) {
            const double top = p00[d] * (1 - fx) + p10[d] * fx;
            const double bot = p01[d] * (1 - fx) + p11[d] * fx;
            out[d] = top * (1 - fy) + bot * fy;
        }
    });
    return fs;
}

std::string resolve_path(const std::string& base_dir, const std::string& rel) {
    if (rel.empty()) return rel;
    std::filesystem::path p(rel);
    if (p.is_absolute() || base_dir.empty()) return rel;
    return (std::filesystem::path(base_dir) / p).string();
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest: " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw FormatError(path + ":" + std::to_string(lineno) + ": invalid JSON line");
        ManifestEntry e;
        e.image = j.value("image", "");
        if (e.image.empty())
            throw FormatError(path + ":" + std::to_string(lineno) + ": missing \"image\"");
        e.image_b = j.value("image_b", "");
        e.kpts = j.value("kpts", "");
        e.desc = j.value("desc", "");
        e.semantic_map = j.value("semantic_map", "");
        e.gt_points = j.value("gt_points", "");
        if (j.contains("pair_homography")) {
            const auto& arr = j["pair_homography"];
            if (!arr.is_array() || arr.size() != 9)
                throw FormatError(path + ":" + std::to_string(lineno) +
                                  ": pair_homography must hold 9 numbers");
            Homography h;
            for (int i = 0; i < 9; ++i) h.m[i] = arr[i].get<double>();
            e.pair_homography = h.normalized();
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    for (const auto& e : entries) {
        nlohmann::json j;
        j["image"] = e.image;
        if (!e.image_b.empty()) j["image_b"] = e.image_b;
        if (!e.kpts.empty()) j["kpts"] = e.kpts;
        if (!e.desc.empty()) j["desc"] = e.desc;
        if (!e.semantic_map.empty()) j["semantic_map"] = e.semantic_map;
        if (!e.gt_points.empty()) j["gt_points"] = e.gt_points;
        if (e.pair_homography) {
            std::vector<double> m(e.pair_homography->m.begin(), e.pair_homography->m.end());
            j["pair_homography"] = m;
        }
        os << j.dump() << "\n";
    }
}

namespace {

std::pair<int, int> read_pgm_size(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image: " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw FormatError(path + ": expected binary PGM (P5)");
    int vals[2];
    int got = 0;
    std::string tok;
    while (got < 2 && is >> tok) {
        if (tok[0] == '#') {
            std::string rest;
            std::getline(is, rest);
            continue;
        }
        vals[got++] = std::stoi(tok);
    }
    if (got != 2) throw FormatError(path + ": truncated PGM header");
    return {vals[0], vals[1]};
}

}  // namespace

std::pair<KeypointSet, FeatureSet> load_keypoints_and_features(const ManifestEntry& entry,
                                                               const std::string& base_dir) {
    if (entry.kpts.empty() || entry.desc.empty())
        throw ConfigError("manifest entry lacks kpts/desc tensor paths");
    const auto [w, h] = read_pgm_size(resolve_path(base_dir, entry.image));

    const Tensor tk = load_tensor(resolve_path(base_dir, entry.kpts));
    Mat coords = mat_from_tensor(tk, entry.kpts);
    if (coords.cols() != 2)
        throw ShapeMismatch(entry.kpts + ": keypoints must be N×2, got N×" +
                            std::to_string(coords.cols()));
    for (int i = 0; i < coords.rows(); ++i) {
        const double x = coords(i, 0), y = coords(i, 1);
        if (x < 0 || y < 0 || x >= w || y >= h)
            throw FormatError(entry.kpts + ": keypoint " + std::to_string(i) +
                              " outside image bounds");
    }

    const Tensor td = load_tensor(resolve_path(base_dir, entry.desc));
    Mat desc = mat_from_tensor(td, entry.desc);
    if (desc.rows() != coords.rows())
        throw ShapeMismatch(entry.desc + ": descriptor rows " + std::to_string(desc.rows()) +
                            " != keypoint count " + std::to_string(coords.rows()));

    KeypointSet kp;
    kp.width = w;
    kp.height = h;
    kp.scores.assign(std::size_t(coords.rows()), 1.0);
    kp.coords = std::move(coords);
    FeatureSet fs;
    fs.role = FeatureSet::Role::base;
    fs.descriptors = std::move(desc);
    return {std::move(kp), std::move(fs)};
}

DenseFeatureMap load_semantic_map(const std::string& path, int image_w, int image_h) {
    const Tensor t = load_tensor(path);
    if (t.shape.size() != 3)
        throw ShapeMismatch(path + ": semantic map must be rank-3 (H,W,D)");
    DenseFeatureMap map;
    map.height = t.shape[0];
    map.width = t.shape[1];
    map.dim = t.shape[2];
    map.stride = double(image_w) / double(map.width);
    const double stride_y = double(image_h) / double(map.height);
    if (std::abs(map.stride - stride_y) > 1e-6)
        throw ShapeMismatch(path + ": map aspect ratio does not match the image");
    map.data.resize(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (!std::isfinite(t.data[i]))
            throw NonFiniteData(path + ": non-finite value in semantic map");
        map.data[i] = double(t.data[i]);
    }
    map.provenance.provider = "file";
    return map;
}

std::vector<PointPair> load_gt_points(const std::string& path) {
    const Tensor t = load_tensor(path);
    if (t.shape.size() != 2 || t.shape[1] != 4)
        throw ShapeMismatch(path + ": gt points must be N×4 (ax, ay, bx, by)");
    std::vector<PointPair> out(std::size_t(t.shape[0]));
    for (int i = 0; i < t.shape[0]; ++i) {
        out[i] = {double(t.data[4 * i]), double(t.data[4 * i + 1]), double(t.data[4 * i + 2]),
                  double(t.data[4 * i + 3])};
    }
    return out;
}

}  // namespace mif
