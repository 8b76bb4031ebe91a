#pragma once

#include <utility>

#include "mif/attention.hpp"
#include "mif/core/autodiff.hpp"
#include "mif/features.hpp"
#include "mif/gmm.hpp"
#include "mif/model.hpp"

namespace mif {

// Latent refinement over plain values: entry MLP, self attention per image,
// cross attention per image, shared weights between images.
std::pair<FeatureSet, FeatureSet> refine_latent(const FeatureSet& latent_a,
                                                const FeatureSet& latent_b, ParamStore& params);

// Differentiable LFA loss terms for one image. EM responsibilities and the
// argmax assignment are constants; the cluster means are recomputed on the
// tape as responsibility-weighted means of the features.
struct LfaLossVars {
    ad::Var intra;
    ad::Var inter;
    ad::Var lfa;  // intra - inter
};

LfaLossVars lfa_loss_op(ad::Tape& t, ad::Var features, const GmmModel& model);

}  // namespace mif
