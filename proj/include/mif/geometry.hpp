#pragma once

#include <array>
#include <utility>
#include <vector>

#include "mif/core/mat.hpp"
#include "mif/core/rng.hpp"

namespace mif {

// 3x3 planar projective transform, row-major, normalized so m[8] == 1.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return Homography{}; }
    static Homography translation(double tx, double ty);
    static Homography rotation_about(double degrees, double cx, double cy);
    static Homography scaling_about(double s, double cx, double cy);

    double det() const;
    Homography normalized() const;  // divide by m[8]; throws DegenerateHomography
    Homography inverse() const;

    // (x, y) -> projective image; throws PointAtInfinity if |w| <= 1e-12
    std::pair<double, double> apply(double x, double y) const;
};

Homography compose(const Homography& a, const Homography& b);  // a after b

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct HomographyConfig {
    Interval rotation_deg{-25.0, 25.0};
    Interval scale{0.7, 1.4};
    double perspective = 0.2;        // max corner displacement, fraction of size
    double translation_frac = 0.1;   // max shift, fraction of image size
    std::uint64_t seed = 0;

    // Enforces the config contract: symmetric rotation, positive scales,
    // perspective within [0, 0.5].
    void validate() const;
};

Homography sample_homography(const HomographyConfig& cfg, int width, int height, Rng& rng);

// pts is N×2 (x, y); returns N×2.
Mat warp_points(const Homography& h, const Mat& pts);

struct CorrespondenceLabels {
    std::vector<std::pair<int, int>> matches;  // (index_in_a, index_in_b)
    std::vector<int> unmatched_a;
    std::vector<int> unmatched_b;
    double threshold_px = 3.0;
};

CorrespondenceLabels label_correspondences(const Mat& kpts_a, const Mat& kpts_b,
                                           const Homography& h_ab, double threshold_px);

struct PointPair {
    double ax, ay, bx, by;
};

struct RansacResult {
    Homography h;
    std::vector<bool> inlier_mask;
    int n_inliers = 0;
};

RansacResult estimate_homography(const std::vector<PointPair>& matches,
                                 double inlier_threshold_px, int max_iters,
                                 double confidence, Rng& rng);

// Least-squares DLT with Hartley normalization; used by RANSAC internally
// and directly when all correspondences are trusted.
Homography fit_homography_dlt(const std::vector<PointPair>& matches);

double homography_error(const Homography& h_true, const Homography& h_pred);

}  // namespace mif
