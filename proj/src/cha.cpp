#include "mif/cha.hpp"

#include "mif/core/error.hpp"

namespace mif {

Mat encode_positions(const KeypointSet& kpts, ParamStore& params) {
    ad::Tape t;
    ParamBinding bind(t, params, false);
    ad::Var coords = t.input(normalized_coords(kpts.coords, kpts.width, kpts.height));
    return t.value(encode_positions_op(t, bind, coords));
}

FeatureSet fuse_initial(const FeatureSet& refined, const FeatureSet& base, const Mat& pe,
                        ParamStore& params) {
    if (refined.descriptors.rows() != base.descriptors.rows() ||
        refined.descriptors.rows() != pe.rows())
        throw ShapeMismatch("fuse_initial: refined/base/pe row counts differ");
    ad::Tape t;
    ParamBinding bind(t, params, false);
    ad::Var r = t.input(refined.descriptors);
    ad::Var b = t.input(base.descriptors);
    ad::Var p = t.input(pe);
    FeatureSet out;
    out.role = FeatureSet::Role::invariant;
    out.descriptors = t.value(fuse_initial_op(t, bind, r, b, p));
    return out;
}

std::vector<std::pair<Mat, Mat>> run_stack(const Mat& fm_a0, const Mat& fm_b0,
                                           ParamStore& params, int layers) {
    ad::Tape t;
    ParamBinding bind(t, params, false);
    ad::Var a = t.input(fm_a0);
    ad::Var b = t.input(fm_b0);
    const auto outputs = run_stack_op(t, bind, a, b, layers);
    std::vector<std::pair<Mat, Mat>> out;
    out.reserve(outputs.size());
    for (const auto& [va, vb] : outputs) out.emplace_back(t.value(va), t.value(vb));
    return out;
}

}  // namespace mif
