#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mif/core/mat.hpp"

namespace mif {

struct GmmModel {
    int k = 0;
    std::vector<double> weights;       // K, sums to 1
    Mat means;                         // K×C
    std::vector<Mat> covariances;      // K of C×C, SPD after regularization
    Mat responsibilities;              // N×K, rows sum to 1
    double log_likelihood = 0.0;       // final total log-likelihood
    std::vector<double> ll_history;    // one entry per EM iteration
};

// K-means++ initialization followed by full-covariance EM. Covariances get
// 1e-6*I added every M-step. A component whose responsibility mass collapses
// below 1e-10 is reseeded once to the lowest-density point; a second collapse
// of the same component raises DegenerateCluster.
GmmModel fit_gmm(const Mat& features, int k, int max_iters, double tol, std::uint64_t seed);

// Density of the mixture at a point (Eq-3 form); used by tests and the
// degenerate-component reseeding rule.
double gmm_density(const GmmModel& model, const double* x, int dim);

double loss_intra(const Mat& features, const GmmModel& model);
double loss_inter(const GmmModel& model);
double loss_lfa(double intra, double inter);

// Diagnostics dump (means, weights, final log-likelihood) as a JSON string.
std::string gmm_diagnostics_json(const GmmModel& model);

}  // namespace mif
