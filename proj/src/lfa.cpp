#include "mif/lfa.hpp"

#include "mif/core/error.hpp"

namespace mif {

std::pair<FeatureSet, FeatureSet> refine_latent(const FeatureSet& latent_a,
                                                const FeatureSet& latent_b, ParamStore& params) {
    if (latent_a.descriptors.rows() == 0 || latent_b.descriptors.rows() == 0)
        throw EmptyFeatureSet("refine_latent needs nonempty feature sets");
    ad::Tape t;
    ParamBinding bind(t, params, false);
    ad::Var la = t.input(latent_a.descriptors);
    ad::Var lb = t.input(latent_b.descriptors);
    auto [ra, rb] = refine_latent_op(t, bind, la, lb);
    FeatureSet fa{t.value(ra), FeatureSet::Role::refined};
    FeatureSet fb{t.value(rb), FeatureSet::Role::refined};
    return {std::move(fa), std::move(fb)};
}

LfaLossVars lfa_loss_op(ad::Tape& t, ad::Var features, const GmmModel& model) {
    const Mat& x = t.value(features);
    const int n = x.rows();
    const int k = model.k;

    // constant weight matrix turning features into responsibility-weighted
    // means: mu = W x, W = diag(1/mass) R^T
    std::vector<double> mass(std::size_t(k), 0.0);
    for (int i = 0; i < n; ++i)
        for (int kk = 0; kk < k; ++kk) mass[kk] += model.responsibilities(i, kk);
    Mat w_mu(k, n);
    for (int kk = 0; kk < k; ++kk) {
        const double inv = mass[kk] > 0.0 ? 1.0 / mass[kk] : 0.0;
        for (int i = 0; i < n; ++i) w_mu(kk, i) = model.responsibilities(i, kk) * inv;
    }
    // constant one-hot argmax assignment
    Mat assign(n, k);
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int kk = 1; kk < k; ++kk)
            if (model.responsibilities(i, kk) > model.responsibilities(i, best)) best = kk;
        assign(i, best) = 1.0;
    }

    ad::Var mu = t.matmul(t.input(std::move(w_mu)), features);  // K×C
    ad::Var centers = t.matmul(t.input(std::move(assign)), mu);  // N×C
    LfaLossVars out;
    out.intra = t.sum_sq(t.sub(features, centers));
    // sum over ordered pairs: 2K*sum|mu_k|^2 - 2*|sum mu_k|^2
    out.inter = t.sub(t.scale(t.sum_sq(mu), 2.0 * k), t.scale(t.sum_sq(t.col_sum(mu)), 2.0));
    out.lfa = t.sub(out.intra, out.inter);
    return out;
}

}  // namespace mif
