#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mif/attention.hpp"
#include "mif/core/autodiff.hpp"
#include "mif/core/mat.hpp"

namespace mif {

struct ModelConfig {
    int feature_dim = 128;  // C
    int layers = 9;         // L
    int gmm_k = 5;          // K
    int base_dim = 64;      // input width of the base-feature adapter
    int latent_dim = 32;    // input width of the latent entry MLP
    int gmm_max_iters = 50;
    double gmm_tol = 1e-6;
    std::uint64_t seed = 0;
};

void init_model_params(ParamStore& store, const ModelConfig& cfg);

std::string cha_layer_prefix(int layer);

// Pixel coords mapped to [-1,1]^2 by image size; the image center lands on 0.
Mat normalized_coords(const Mat& coords, int width, int height);

// Latent refinement: entry MLP, one self update per image, one cross update
// per image. Weights are shared between the two images.
std::pair<ad::Var, ad::Var> refine_latent_op(ad::Tape& t, ParamBinding& bind, ad::Var latent_a,
                                             ad::Var latent_b);

ad::Var encode_positions_op(ad::Tape& t, ParamBinding& bind, ad::Var coords_norm);

// F^m = (pe + refined) + (pe + adapter(base)); the positional term enters both
// branches, as written.
ad::Var fuse_initial_op(ad::Tape& t, ParamBinding& bind, ad::Var refined, ad::Var base,
                        ad::Var pe);

// L layers of self-then-cross updates; returns the retained per-layer outputs.
std::vector<std::pair<ad::Var, ad::Var>> run_stack_op(ad::Tape& t, ParamBinding& bind,
                                                      ad::Var fm_a0, ad::Var fm_b0, int layers);

ad::Var matchability_op(ad::Tape& t, ParamBinding& bind, ad::Var features, int layer);

struct PairInputs {
    Mat latent_a, latent_b;  // N×D
    Mat base_a, base_b;      // N×C_base
    Mat coords_a, coords_b;  // N×2 pixel coordinates
    int width_a = 0, height_a = 0, width_b = 0, height_b = 0;
};

struct PairForward {
    ad::Var refined_a, refined_b;
    std::vector<std::pair<ad::Var, ad::Var>> layer_outputs;
    std::vector<std::pair<ad::Var, ad::Var>> layer_sigmas;  // N×1 per image per layer
};

PairForward forward_pair(ad::Tape& t, ParamBinding& bind, const PairInputs& in,
                         const ModelConfig& cfg);

// Checkpoint: magic "MIFC", uint32 header length, JSON header with model
// metadata and a named-entry table, then concatenated MIFT tensors.
struct CheckpointMeta {
    ModelConfig config;
    std::string config_hash;
    int epoch = 0;
};

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const CheckpointMeta& meta);
std::pair<ParamStore, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace mif
