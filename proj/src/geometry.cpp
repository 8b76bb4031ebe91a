#include "mif/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "mif/core/error.hpp"
#include "mif/core/kernels.hpp"

namespace mif {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegenerateDet = 1e-12;
constexpr double kWEpsilon = 1e-12;
}  // namespace

Homography Homography::translation(double tx, double ty) {
    Homography h;
    h.m = {1, 0, tx, 0, 1, ty, 0, 0, 1};
    return h;
}

Homography Homography::rotation_about(double degrees, double cx, double cy) {
    const double a = degrees * kPi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    Homography rot;
    rot.m = {c, -s, 0, s, c, 0, 0, 0, 1};
    return compose(Homography::translation(cx, cy),
                   compose(rot, Homography::translation(-cx, -cy)));
}

Homography Homography::scaling_about(double s, double cx, double cy) {
    Homography sc;
    sc.m = {s, 0, 0, 0, s, 0, 0, 0, 1};
    return compose(Homography::translation(cx, cy),
                   compose(sc, Homography::translation(-cx, -cy)));
}

double Homography::det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Homography Homography::normalized() const {
    if (std::abs(m[8]) < kWEpsilon)
        throw DegenerateHomography("cannot normalize: bottom-right entry is ~0");
    Homography out;
    for (int i = 0; i < 9; ++i) out.m[i] = m[i] / m[8];
    return out;
}

Homography Homography::inverse() const {
    const double d = det();
    if (std::abs(d) < kDegenerateDet)
        throw DegenerateHomography("singular homography, |det| < 1e-12");
    Homography inv;
    inv.m[0] = (m[4] * m[8] - m[5] * m[7]) / d;
    inv.m[1] = (m[2] * m[7] - m[1] * m[8]) / d;
    inv.m[2] = (m[1] * m[5] - m[2] * m[4]) / d;
    inv.m[3] = (m[5] * m[6] - m[3] * m[8]) / d;
    inv.m[4] = (m[0] * m[8] - m[2] * m[6]) / d;
    inv.m[5] = (m[2] * m[3] - m[0] * m[5]) / d;
    inv.m[6] = (m[3] * m[7] - m[4] * m[6]) / d;
    inv.m[7] = (m[1] * m[6] - m[0] * m[7]) / d;
    inv.m[8] = (m[0] * m[4] - m[1] * m[3]) / d;
    return inv.normalized();
}

std::pair<double, double> Homography::apply(double x, double y) const {
    const double w = m[6] * x + m[7] * y + m[8];
    if (std::abs(w) <= kWEpsilon)
        throw PointAtInfinity("point maps to infinity under homography");
    return {(m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w};
}

Homography compose(const Homography& a, const Homography& b) {
    Homography out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a.m[i * 3 + k] * b.m[k * 3 + j];
            out.m[i * 3 + j] = s;
        }
    return out;
}

void HomographyConfig::validate() const {
    if (rotation_deg.lo != -rotation_deg.hi)
        throw ConfigError("homography rotation range must be symmetric about 0");
    if (scale.lo <= 0.0 || scale.hi < scale.lo)
        throw ConfigError("homography scale range must be positive and ordered");
    if (perspective < 0.0 || perspective > 0.5)
        throw ConfigError("perspective distortion must be in [0, 0.5]");
    if (translation_frac < 0.0 || translation_frac > 1.0)
        throw ConfigError("translation fraction must be in [0, 1]");
}

namespace {

bool quad_is_convex(const std::array<std::pair<double, double>, 4>& q) {
    int sign = 0;
    for (int i = 0; i < 4; ++i) {
        const auto& p0 = q[i];
        const auto& p1 = q[(i + 1) % 4];
        const auto& p2 = q[(i + 2) % 4];
        const double cross = (p1.first - p0.first) * (p2.second - p1.second) -
                             (p1.second - p0.second) * (p2.first - p1.first);
        if (std::abs(cross) < 1e-9) continue;
        const int s = cross > 0 ? 1 : -1;
        if (sign == 0)
            sign = s;
        else if (s != sign)
            return false;
    }
    return sign != 0;
}

}  // namespace

Homography sample_homography(const HomographyConfig& cfg, int width, int height, Rng& rng) {
    if (width <= 0 || height <= 0) throw ConfigError("image size must be positive");
    const double cx = width / 2.0, cy = height / 2.0;
    for (int attempt = 0; attempt < 100; ++attempt) {
        // perspective jitter: displace the four corners, then solve the
        // 4-point transform mapping the original corners onto them
        std::vector<PointPair> corners = {
            {0, 0, 0, 0},
            {double(width), 0, double(width), 0},
            {double(width), double(height), double(width), double(height)},
            {0, double(height), 0, double(height)}};
        for (auto& c : corners) {
            c.bx = c.ax + rng.uniform(-cfg.perspective, cfg.perspective) * width;
            c.by = c.ay + rng.uniform(-cfg.perspective, cfg.perspective) * height;
        }
        const double s = rng.uniform(cfg.scale.lo, cfg.scale.hi);
        const double rot = rng.uniform(cfg.rotation_deg.lo, cfg.rotation_deg.hi);
        const double tx = rng.uniform(-cfg.translation_frac, cfg.translation_frac) * width;
        const double ty = rng.uniform(-cfg.translation_frac, cfg.translation_frac) * height;

        Homography persp;
        try {
            persp = (cfg.perspective > 0.0) ? fit_homography_dlt(corners) : Homography::identity();
        } catch (const Error&) {
            continue;
        }
        Homography h = compose(
            Homography::translation(tx, ty),
            compose(Homography::rotation_about(rot, cx, cy),
                    compose(Homography::scaling_about(s, cx, cy), persp)));
        if (std::abs(h.det()) < kDegenerateDet) continue;
        h = h.normalized();

        std::array<std::pair<double, double>, 4> warped;
        bool ok = true;
        const std::array<std::pair<double, double>, 4> src = {
            {{0, 0}, {double(width), 0}, {double(width), double(height)}, {0, double(height)}}};
        for (int i = 0; i < 4; ++i) {
            try {
                warped[i] = h.apply(src[i].first, src[i].second);
            } catch (const PointAtInfinity&) {
                ok = false;
                break;
            }
        }
        if (!ok || !quad_is_convex(warped)) continue;
        return h;
    }
    throw DegenerateHomography("no valid homography after 100 attempts");
}

Mat warp_points(const Homography& h, const Mat& pts) {
    Mat out(pts.rows(), 2);
    // check for points at infinity up front so the kernel stays throw-free
    for (int i = 0; i < pts.rows(); ++i) {
        const double w = h.m[6] * pts(i, 0) + h.m[7] * pts(i, 1) + h.m[8];
        if (std::abs(w) <= kWEpsilon)
            throw PointAtInfinity("point " + std::to_string(i) + " maps to infinity");
    }
    kern::parallel_for(pts.rows(), [&](int i) {
        const double x = pts(i, 0), y = pts(i, 1);
        const double w = h.m[6] * x + h.m[7] * y + h.m[8];
        out(i, 0) = (h.m[0] * x + h.m[1] * y + h.m[2]) / w;
        out(i, 1) = (h.m[3] * x + h.m[4] * y + h.m[5]) / w;
    });
    return out;
}

CorrespondenceLabels label_correspondences(const Mat& kpts_a, const Mat& kpts_b,
                                           const Homography& h_ab, double threshold_px) {
    CorrespondenceLabels out;
    out.threshold_px = threshold_px;
    const int na = kpts_a.rows(), nb = kpts_b.rows();
    if (na == 0 || nb == 0) {
        for (int i = 0; i < na; ++i) out.unmatched_a.push_back(i);
        for (int j = 0; j < nb; ++j) out.unmatched_b.push_back(j);
        return out;
    }
    const Mat warped = warp_points(h_ab, kpts_a);
    const Mat d2 = kern::pairwise_sqdist(warped, kpts_b);
    const double t2 = threshold_px * threshold_px;

    std::vector<int> best_b(na, -1), best_a(nb, -1);
    for (int i = 0; i < na; ++i) {
        double best = t2;
        for (int j = 0; j < nb; ++j)
            if (d2(i, j) <= best) {
                // strict < keeps the lowest index on ties
                if (d2(i, j) < best || best_b[i] == -1) {
                    best = d2(i, j);
                    best_b[i] = j;
                }
            }
    }
    for (int j = 0; j < nb; ++j) {
        double best = t2;
        for (int i = 0; i < na; ++i)
            if (d2(i, j) <= best) {
                if (d2(i, j) < best || best_a[j] == -1) {
                    best = d2(i, j);
                    best_a[j] = i;
                }
            }
    }
    std::vector<bool> a_matched(na, false), b_matched(nb, false);
    for (int i = 0; i < na; ++i) {
        const int j = best_b[i];
        if (j >= 0 && best_a[j] == i) {
            out.matches.emplace_back(i, j);
            a_matched[i] = true;
            b_matched[j] = true;
        }
    }
    for (int i = 0; i < na; ++i)
        if (!a_matched[i]) out.unmatched_a.push_back(i);
    for (int j = 0; j < nb; ++j)
        if (!b_matched[j]) out.unmatched_b.push_back(j);
    return out;
}

namespace {

struct Normalizer {
    double cx = 0, cy = 0, scale = 1;

    static Normalizer fit(const std::vector<PointPair>& pts, bool use_a) {
        Normalizer n;
        const double count = double(pts.size());
        for (const auto& p : pts) {
            n.cx += use_a ? p.ax : p.bx;
            n.cy += use_a ? p.ay : p.by;
        }
        n.cx /= count;
        n.cy /= count;
        double mean_dist = 0;
        for (const auto& p : pts) {
            const double dx = (use_a ? p.ax : p.bx) - n.cx;
            const double dy = (use_a ? p.ay : p.by) - n.cy;
            mean_dist += std::sqrt(dx * dx + dy * dy);
        }
        mean_dist /= count;
        n.scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
        return n;
    }

    Homography transform() const {
        Homography t;
        t.m = {scale, 0, -scale * cx, 0, scale, -scale * cy, 0, 0, 1};
        return t;
    }
};

double reproj_error_sq(const Homography& h, const PointPair& p) {
    const double w = h.m[6] * p.ax + h.m[7] * p.ay + h.m[8];
    if (std::abs(w) <= kWEpsilon) return std::numeric_limits<double>::infinity();
    const double x = (h.m[0] * p.ax + h.m[1] * p.ay + h.m[2]) / w;
    const double y = (h.m[3] * p.ax + h.m[4] * p.ay + h.m[5]) / w;
    const double dx = x - p.bx, dy = y - p.by;
    return dx * dx + dy * dy;
}

double triangle_area2(double x0, double y0, double x1, double y1, double x2, double y2) {
    return std::abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0));
}

bool sample_is_degenerate(const std::vector<PointPair>& m, const std::array<int, 4>& idx) {
    for (int skip = 0; skip < 4; ++skip) {
        std::array<int, 3> tri;
        int t = 0;
        for (int i = 0; i < 4; ++i)
            if (i != skip) tri[t++] = idx[i];
        const auto& p0 = m[tri[0]];
        const auto& p1 = m[tri[1]];
        const auto& p2 = m[tri[2]];
        if (triangle_area2(p0.ax, p0.ay, p1.ax, p1.ay, p2.ax, p2.ay) < 2e-6) return true;
        if (triangle_area2(p0.bx, p0.by, p1.bx, p1.by, p2.bx, p2.by) < 2e-6) return true;
    }
    return false;
}

}  // namespace

Homography fit_homography_dlt(const std::vector<PointPair>& matches) {
    if (matches.size() < 4)
        throw InsufficientMatches("DLT needs >= 4 correspondences, got " +
                                  std::to_string(matches.size()));
    const Normalizer na = Normalizer::fit(matches, true);
    const Normalizer nb = Normalizer::fit(matches, false);

    Eigen::MatrixXd a(2 * matches.size(), 9);
    for (std::size_t r = 0; r < matches.size(); ++r) {
        const double x = na.scale * (matches[r].ax - na.cx);
        const double y = na.scale * (matches[r].ay - na.cy);
        const double xp = nb.scale * (matches[r].bx - nb.cx);
        const double yp = nb.scale * (matches[r].by - nb.cy);
        a.row(2 * r) << 0, 0, 0, -x, -y, -1, yp * x, yp * y, yp;
        a.row(2 * r + 1) << x, y, 1, 0, 0, 0, -xp * x, -xp * y, -xp;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd hvec = svd.matrixV().col(8);

    Homography hn;
    for (int i = 0; i < 9; ++i) hn.m[i] = hvec(i);
    const Homography h = compose(nb.transform().inverse(), compose(hn, na.transform()));
    if (std::abs(h.m[8]) < kWEpsilon)
        throw EstimationFailed("DLT produced a degenerate homography");
    return h.normalized();
}

RansacResult estimate_homography(const std::vector<PointPair>& matches,
                                 double inlier_threshold_px, int max_iters,
                                 double confidence, Rng& rng) {
    const int n = int(matches.size());
    if (n < 4)
        throw InsufficientMatches("RANSAC needs >= 4 correspondences, got " + std::to_string(n));
    const double t2 = inlier_threshold_px * inlier_threshold_px;

    int best_inliers = 0;
    Homography best_h;
    bool have_model = false;

    int iters_needed = max_iters;
    for (int it = 0; it < std::min(max_iters, iters_needed); ++it) {
        std::array<int, 4> idx{};
        int filled = 0;
        // rejection-sample 4 distinct indices
        while (filled < 4) {
            const int candidate = int(rng.uniform_index(std::uint64_t(n)));
            bool dup = false;
            for (int k = 0; k < filled; ++k) dup |= (idx[k] == candidate);
            if (!dup) idx[filled++] = candidate;
        }
        if (sample_is_degenerate(matches, idx)) continue;
        std::vector<PointPair> sample = {matches[idx[0]], matches[idx[1]], matches[idx[2]],
                                         matches[idx[3]]};
        Homography h;
        try {
            h = fit_homography_dlt(sample);
        } catch (const Error&) {
            continue;
        }
        int inliers = 0;
        for (const auto& p : matches)
            if (reproj_error_sq(h, p) <= t2) ++inliers;
        if (inliers > best_inliers) {
            best_inliers = inliers;
            best_h = h;
            have_model = true;
            const double w = double(inliers) / n;
            const double denom = std::log(std::max(1e-12, 1.0 - w * w * w * w));
            if (denom < 0) {
                const double need = std::log(std::max(1e-12, 1.0 - confidence)) / denom;
                iters_needed = std::min<double>(max_iters, std::ceil(need)) < 1
                                   ? 1
                                   : int(std::min<double>(max_iters, std::ceil(need)));
            }
        }
    }
    if (!have_model || best_inliers < 4)
        throw EstimationFailed("no RANSAC sample produced >= 4 inliers");

    // refit on the consensus set, then recompute the mask from the refit model
    std::vector<PointPair> consensus;
    for (const auto& p : matches)
        if (reproj_error_sq(best_h, p) <= t2) consensus.push_back(p);
    Homography refined = best_h;
    try {
        refined = fit_homography_dlt(consensus);
    } catch (const Error&) {
        // keep the minimal-sample model when the refit degenerates
    }

    RansacResult res;
    res.h = refined.normalized();
    res.inlier_mask.resize(n, false);
    for (int i = 0; i < n; ++i) {
        res.inlier_mask[i] = reproj_error_sq(res.h, matches[i]) <= t2;
        if (res.inlier_mask[i]) ++res.n_inliers;
    }
    return res;
}

double homography_error(const Homography& h_true, const Homography& h_pred) {
    double s = 0.0;
    for (int i = 0; i < 9; ++i) {
        const double d = h_true.m[i] - h_pred.m[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace mif
