#pragma once

#include <utility>
#include <vector>

#include "mif/attention.hpp"
#include "mif/features.hpp"
#include "mif/model.hpp"

namespace mif {

// Plain-value CHA surfaces; the tape-level counterparts live in model.hpp.

Mat encode_positions(const KeypointSet& kpts, ParamStore& params);

FeatureSet fuse_initial(const FeatureSet& refined, const FeatureSet& base, const Mat& pe,
                        ParamStore& params);

std::vector<std::pair<Mat, Mat>> run_stack(const Mat& fm_a0, const Mat& fm_b0,
                                           ParamStore& params, int layers);

}  // namespace mif
