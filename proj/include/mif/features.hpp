#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mif/core/image.hpp"
#include "mif/core/mat.hpp"
#include "mif/geometry.hpp"

namespace mif {

struct KeypointSet {
    Mat coords;  // N×2, (x, y) pixel coordinates
    std::vector<double> scores;
    int width = 0;
    int height = 0;

    int count() const { return coords.rows(); }
};

struct FeatureSet {
    enum class Role { base, latent, refined, invariant };
    Mat descriptors;  // N×C
    Role role = Role::base;
};

struct DenseFeatureMap {
    int height = 0;
    int width = 0;
    int dim = 0;
    std::vector<double> data;  // (y*width + x)*dim + d
    double stride = 1.0;       // image_px = map_coord * stride

    struct Provenance {
        std::string provider;
        int decoder_layer = -1;  // l of the original extractor, when known
        int noise_steps = -1;    // t of the original extractor, when known
        int depth = 0;
        std::uint64_t proj_seed = 0;
    } provenance;

    const double* at(int x, int y) const {
        return data.data() + (std::size_t(y) * width + x) * dim;
    }
    double* at(int x, int y) { return data.data() + (std::size_t(y) * width + x) * dim; }
};

// Harris-style detector with greedy NMS; descriptors are L2-normalized
// 8x8 intensity patches (zero-padded at borders), so C_base = 64.
std::pair<KeypointSet, FeatureSet> detect_keypoints_synthetic(const Image& img, int max_kpts,
                                                              double nms_radius);

// Pre-projection channel stack of the synthetic semantic provider:
// per level, the Gaussian-blurred image (sigma doubling) and its gradient
// magnitude, each standardized over the image. 2*depth channels.
std::vector<Image> semantic_channels(const Image& img, int depth);

DenseFeatureMap synthetic_semantic_map(const Image& img, int depth, std::uint64_t proj_seed,
                                       int out_dim);

FeatureSet sample_dense_at_keypoints(const DenseFeatureMap& map, const KeypointSet& kpts);

// One JSON line per entry; optional fields empty when absent. Paths are
// resolved relative to the manifest location by the loaders.
struct ManifestEntry {
    std::string image;
    std::string image_b;
    std::string kpts;
    std::string desc;
    std::string semantic_map;
    std::string gt_points;
    std::optional<Homography> pair_homography;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

std::pair<KeypointSet, FeatureSet> load_keypoints_and_features(const ManifestEntry& entry,
                                                               const std::string& base_dir);
DenseFeatureMap load_semantic_map(const std::string& path, int image_w, int image_h);

// N×4 rows of (ax, ay, bx, by)
std::vector<PointPair> load_gt_points(const std::string& path);

std::string resolve_path(const std::string& base_dir, const std::string& rel);

}  // namespace mif
