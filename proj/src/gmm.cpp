#include "mif/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "mif/core/error.hpp"
#include "mif/core/kernels.hpp"
#include "mif/core/rng.hpp"

namespace mif {

namespace {

constexpr double kCovarianceReg = 1e-6;
constexpr double kDegenerateMass = 1e-10;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Lower-triangular Cholesky factor; returns false when the matrix is not
// positive definite at working precision.
bool cholesky(const Mat& a, Mat& l) {
    const int n = a.rows();
    l = Mat(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0) return false;
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return true;
}

struct Component {
    Mat chol;        // C×C lower factor of the covariance
    double log_det;  // log det covariance
    double log_weight;
};

double log_gaussian(const Component& c, const Mat& means, int k, const double* x, int dim,
                    std::vector<double>& scratch) {
    // solve L y = (x - mu), quad = |y|^2
    for (int i = 0; i < dim; ++i) {
        double s = x[i] - means(k, i);
        for (int j = 0; j < i; ++j) s -= c.chol(i, j) * scratch[j];
        scratch[i] = s / c.chol(i, i);
    }
    double quad = 0.0;
    for (int i = 0; i < dim; ++i) quad += scratch[i] * scratch[i];
    return -0.5 * (dim * kLog2Pi + c.log_det + quad);
}

std::vector<Component> prepare_components(const GmmModel& m) {
    std::vector<Component> comps(std::size_t(m.k));
    for (int k = 0; k < m.k; ++k) {
        Mat cov = m.covariances[k];
        double reg = 0.0;
        while (!cholesky(cov, comps[k].chol)) {
            reg = reg == 0.0 ? kCovarianceReg : reg * 10.0;
            if (reg > 1.0) throw DegenerateCluster("covariance not positive definite");
            for (int i = 0; i < cov.rows(); ++i) cov(i, i) += reg;
        }
        comps[k].log_det = 0.0;
        for (int i = 0; i < comps[k].chol.rows(); ++i)
            comps[k].log_det += 2.0 * std::log(comps[k].chol(i, i));
        comps[k].log_weight = std::log(std::max(m.weights[k], 1e-300));
    }
    return comps;
}

Mat global_covariance(const Mat& x) {
    const int n = x.rows(), c = x.cols();
    std::vector<double> mean(std::size_t(c), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) mean[j] += x(i, j);
    for (double& v : mean) v /= double(n);
    Mat cov(c, c);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < c; ++a) {
            const double da = x(i, a) - mean[a];
            for (int b = 0; b <= a; ++b) cov(a, b) += da * (x(i, b) - mean[b]);
        }
    for (int a = 0; a < c; ++a)
        for (int b = 0; b <= a; ++b) {
            cov(a, b) /= double(n);
            cov(b, a) = cov(a, b);
        }
    for (int a = 0; a < c; ++a) cov(a, a) += kCovarianceReg;
    return cov;
}

Mat kmeans_pp(const Mat& x, int k, Rng& rng) {
    const int n = x.rows(), c = x.cols();
    Mat centers(k, c);
    std::vector<double> d2(std::size_t(n), std::numeric_limits<double>::infinity());
    int first = int(rng.uniform_index(std::uint64_t(n)));
    for (int j = 0; j < c; ++j) centers(0, j) = x(first, j);
    for (int ck = 1; ck < k; ++ck) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < c; ++j) {
                const double d = x(i, j) - centers(ck - 1, j);
                s += d * d;
            }
            d2[i] = std::min(d2[i], s);
            total += d2[i];
        }
        int pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = int(rng.uniform_index(std::uint64_t(n)));
        }
        for (int j = 0; j < c; ++j) centers(ck, j) = x(pick, j);
    }

    // Lloyd refinement
    std::vector<int> assign(std::size_t(n), 0);
    for (int iter = 0; iter < 20; ++iter) {
        bool changed = false;
        const Mat dist = kern::pairwise_sqdist(x, centers);
        for (int i = 0; i < n; ++i) {
            int best = 0;
            for (int kk = 1; kk < k; ++kk)
                if (dist(i, kk) < dist(i, best)) best = kk;
            if (best != assign[i]) {
                assign[i] = best;
                changed = true;
            }
        }
        Mat sums(k, c);
        std::vector<int> counts(std::size_t(k), 0);
        for (int i = 0; i < n; ++i) {
            ++counts[assign[i]];
            for (int j = 0; j < c; ++j) sums(assign[i], j) += x(i, j);
        }
        for (int kk = 0; kk < k; ++kk)
            if (counts[kk] > 0)
                for (int j = 0; j < c; ++j) centers(kk, j) = sums(kk, j) / counts[kk];
        if (!changed) break;
    }
    return centers;
}

}  // namespace

double gmm_density(const GmmModel& model, const double* x, int dim) {
    const auto comps = prepare_components(model);
    std::vector<double> scratch(std::size_t(dim));
    double p = 0.0;
    for (int k = 0; k < model.k; ++k)
        p += model.weights[k] * std::exp(log_gaussian(comps[k], model.means, k, x, dim, scratch));
    return p;
}

GmmModel fit_gmm(const Mat& features, int k, int max_iters, double tol, std::uint64_t seed) {
    const int n = features.rows(), c = features.cols();
    if (k < 1) throw ConfigError("gmm k must be >= 1");
    if (n < k)
        throw ConfigError("gmm needs at least k points, got " + std::to_string(n) + " for k=" +
                          std::to_string(k));

    Rng rng(seed);
    GmmModel m;
    m.k = k;
    m.means = kmeans_pp(features, k, rng);
    const Mat gcov = global_covariance(features);
    m.covariances.assign(std::size_t(k), gcov);
    m.weights.assign(std::size_t(k), 1.0 / k);
    m.responsibilities = Mat(n, k);

    std::vector<int> reseeds(std::size_t(k), 0);
    Mat log_prob(n, k);

    auto e_step = [&]() {
        const auto comps = prepare_components(m);
        kern::parallel_for(n, [&](int i) {
            std::vector<double> scratch(std::size_t(c));
            for (int kk = 0; kk < k; ++kk)
                log_prob(i, kk) = comps[kk].log_weight +
                                  log_gaussian(comps[kk], m.means, kk, features.row(i), c, scratch);
        });
        double ll = 0.0;
        for (int i = 0; i < n; ++i) {
            double mx = log_prob(i, 0);
            for (int kk = 1; kk < k; ++kk) mx = std::max(mx, log_prob(i, kk));
            double sum = 0.0;
            for (int kk = 0; kk < k; ++kk) {
                m.responsibilities(i, kk) = std::exp(log_prob(i, kk) - mx);
                sum += m.responsibilities(i, kk);
            }
            const double inv = 1.0 / sum;
            for (int kk = 0; kk < k; ++kk) m.responsibilities(i, kk) *= inv;
            ll += mx + std::log(sum);
        }
        m.ll_history.push_back(ll);
        m.log_likelihood = ll;
    };

    for (int iter = 0; iter < max_iters; ++iter) {
        e_step();
        if (m.ll_history.size() >= 2) {
            const double prev = m.ll_history[m.ll_history.size() - 2];
            if (m.log_likelihood - prev < tol) break;
        }

        // M-step
        std::vector<double> mass(std::size_t(k), 0.0);
        for (int i = 0; i < n; ++i)
            for (int kk = 0; kk < k; ++kk) mass[kk] += m.responsibilities(i, kk);

        bool reseeded = false;
        for (int kk = 0; kk < k; ++kk) {
            if (mass[kk] < kDegenerateMass) {
                if (++reseeds[kk] > 1)
                    throw DegenerateCluster("component " + std::to_string(kk) +
                                            " collapsed twice");
                // reseed at the lowest-density point under the current model
                int worst = 0;
                double worst_p = std::numeric_limits<double>::infinity();
                for (int i = 0; i < n; ++i) {
                    double mx = log_prob(i, 0);
                    for (int j = 1; j < k; ++j) mx = std::max(mx, log_prob(i, j));
                    double s = 0.0;
                    for (int j = 0; j < k; ++j) s += std::exp(log_prob(i, j) - mx);
                    const double logp = mx + std::log(s);
                    if (logp < worst_p) {
                        worst_p = logp;
                        worst = i;
                    }
                }
                for (int j = 0; j < c; ++j) m.means(kk, j) = features(worst, j);
                m.covariances[kk] = gcov;
                m.weights[kk] = 1.0 / n;
                reseeded = true;
            }
        }
        if (reseeded) {
            double wsum = 0.0;
            for (int kk = 0; kk < k; ++kk) {
                if (mass[kk] >= kDegenerateMass) m.weights[kk] = mass[kk] / n;
                wsum += m.weights[kk];
            }
            for (double& w : m.weights) w /= wsum;
            continue;  // redo the E-step under the repaired model
        }

        for (int kk = 0; kk < k; ++kk) m.weights[kk] = mass[kk] / n;
        kern::parallel_for(k, [&](int kk) {
            for (int j = 0; j < c; ++j) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += m.responsibilities(i, kk) * features(i, j);
                m.means(kk, j) = s / mass[kk];
            }
            Mat cov(c, c);
            for (int i = 0; i < n; ++i) {
                const double r = m.responsibilities(i, kk);
                const double* xi = features.row(i);
                for (int a = 0; a < c; ++a) {
                    const double da = xi[a] - m.means(kk, a);
                    for (int b = 0; b <= a; ++b) cov(a, b) += r * da * (xi[b] - m.means(kk, b));
                }
            }
            for (int a = 0; a < c; ++a)
                for (int b = 0; b <= a; ++b) {
                    cov(a, b) /= mass[kk];
                    cov(b, a) = cov(a, b);
                }
            for (int a = 0; a < c; ++a) cov(a, a) += kCovarianceReg;
            m.covariances[kk] = std::move(cov);
        });
        // keep responsibilities in sync with parameters when the loop is
        // about to end on the iteration cap
        if (iter == max_iters - 1) e_step();
    }
    return m;
}

double loss_intra(const Mat& features, const GmmModel& model) {
    const int n = features.rows(), c = features.cols(), k = model.k;
    // responsibility-weighted means (equal to the M-step means at convergence)
    std::vector<double> mass(std::size_t(k), 0.0);
    Mat mu(k, c);
    for (int i = 0; i < n; ++i)
        for (int kk = 0; kk < k; ++kk) {
            const double r = model.responsibilities(i, kk);
            mass[kk] += r;
            for (int j = 0; j < c; ++j) mu(kk, j) += r * features(i, j);
        }
    for (int kk = 0; kk < k; ++kk) {
        const double inv = mass[kk] > 0.0 ? 1.0 / mass[kk] : 0.0;
        for (int j = 0; j < c; ++j) mu(kk, j) *= inv;
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int kk = 1; kk < k; ++kk)
            if (model.responsibilities(i, kk) > model.responsibilities(i, best)) best = kk;
        double s = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = features(i, j) - mu(best, j);
            s += d * d;
        }
        total += s;
    }
    return total;
}

double loss_inter(const GmmModel& model) {
    double total = 0.0;
    for (int k = 0; k < model.k; ++k)
        for (int j = 0; j < model.k; ++j) {
            if (j == k) continue;
            double s = 0.0;
            for (int cIdx = 0; cIdx < model.means.cols(); ++cIdx) {
                const double d = model.means(k, cIdx) - model.means(j, cIdx);
                s += d * d;
            }
            total += s;
        }
    return total;
}

double loss_lfa(double intra, double inter) { return intra - inter; }

std::string gmm_diagnostics_json(const GmmModel& model) {
    nlohmann::json j;
    j["k"] = model.k;
    j["weights"] = model.weights;
    j["log_likelihood"] = model.log_likelihood;
    std::vector<std::vector<double>> means;
    for (int k = 0; k < model.k; ++k)
        means.emplace_back(model.means.row(k), model.means.row(k) + model.means.cols());
    j["means"] = means;
    return j.dump();
}

}  // namespace mif
