#include "mif/model.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mif/core/error.hpp"
#include "mif/core/tensor_file.hpp"

namespace mif {

std::string cha_layer_prefix(int layer) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "cha.layer%02d", layer);
    return buf;
}

void init_model_params(ParamStore& store, const ModelConfig& cfg) {
    Rng rng(cfg.seed);
    const int c = cfg.feature_dim;
    add_mlp_params(store, "lfa.entry", cfg.latent_dim, c, c, rng);
    add_attention_params(store, "lfa.self", c, rng);
    add_attention_params(store, "lfa.cross", c, rng);
    add_mlp_params(store, "cha.pe", 2, c, c, rng);
    add_mlp_params(store, "cha.base", cfg.base_dim, c, c, rng);
    for (int j = 0; j < cfg.layers; ++j) {
        const std::string prefix = cha_layer_prefix(j);
        add_attention_params(store, prefix + ".self", c, rng);
        add_attention_params(store, prefix + ".cross", c, rng);
        store.add(prefix + ".head.w", Mat(c, 1));
        store.add(prefix + ".head.b", Mat(1, 1));
    }
}

Mat normalized_coords(const Mat& coords, int width, int height) {
    Mat out(coords.rows(), 2);
    for (int i = 0; i < coords.rows(); ++i) {
        out(i, 0) = 2.0 * coords(i, 0) / double(width) - 1.0;
        out(i, 1) = 2.0 * coords(i, 1) / double(height) - 1.0;
    }
    return out;
}

std::pair<ad::Var, ad::Var> refine_latent_op(ad::Tape& t, ParamBinding& bind, ad::Var latent_a,
                                             ad::Var latent_b) {
    ad::Var a = mlp_forward(t, latent_a, bind, "lfa.entry");
    ad::Var b = mlp_forward(t, latent_b, bind, "lfa.entry");
    const AttentionVars self_unit = bind_attention(bind, "lfa.self");
    const AttentionVars cross_unit = bind_attention(bind, "lfa.cross");
    a = attention_update_op(t, a, a, self_unit);
    b = attention_update_op(t, b, b, self_unit);
    // both cross updates read the post-self features of the other image
    ad::Var a2 = attention_update_op(t, a, b, cross_unit);
    ad::Var b2 = attention_update_op(t, b, a, cross_unit);
    return {a2, b2};
}

ad::Var encode_positions_op(ad::Tape& t, ParamBinding& bind, ad::Var coords_norm) {
    return mlp_forward(t, coords_norm, bind, "cha.pe");
}

ad::Var fuse_initial_op(ad::Tape& t, ParamBinding& bind, ad::Var refined, ad::Var base,
                        ad::Var pe) {
    ad::Var adapted = mlp_forward(t, base, bind, "cha.base");
    return t.add(t.add(pe, refined), t.add(pe, adapted));
}

std::vector<std::pair<ad::Var, ad::Var>> run_stack_op(ad::Tape& t, ParamBinding& bind,
                                                      ad::Var fm_a0, ad::Var fm_b0, int layers) {
    std::vector<std::pair<ad::Var, ad::Var>> outputs;
    outputs.reserve(std::size_t(layers));
    ad::Var a = fm_a0, b = fm_b0;
    for (int j = 0; j < layers; ++j) {
        const std::string prefix = cha_layer_prefix(j);
        const AttentionVars self_unit = bind_attention(bind, prefix + ".self");
        const AttentionVars cross_unit = bind_attention(bind, prefix + ".cross");
        a = attention_update_op(t, a, a, self_unit);
        b = attention_update_op(t, b, b, self_unit);
        ad::Var a2 = attention_update_op(t, a, b, cross_unit);
        ad::Var b2 = attention_update_op(t, b, a, cross_unit);
        a = a2;
        b = b2;
        outputs.emplace_back(a, b);
    }
    return outputs;
}

ad::Var matchability_op(ad::Tape& t, ParamBinding& bind, ad::Var features, int layer) {
    const std::string prefix = cha_layer_prefix(layer);
    return t.sigmoid(
        t.add_bias(t.matmul(features, bind[prefix + ".head.w"]), bind[prefix + ".head.b"]));
}

PairForward forward_pair(ad::Tape& t, ParamBinding& bind, const PairInputs& in,
                         const ModelConfig& cfg) {
    if (in.latent_a.rows() == 0 || in.latent_b.rows() == 0)
        throw EmptyFeatureSet("forward pass needs nonempty feature sets");
    PairForward out;
    ad::Var la = t.input(in.latent_a);
    ad::Var lb = t.input(in.latent_b);
    std::tie(out.refined_a, out.refined_b) = refine_latent_op(t, bind, la, lb);

    ad::Var pe_a =
        encode_positions_op(t, bind, t.input(normalized_coords(in.coords_a, in.width_a, in.height_a)));
    ad::Var pe_b =
        encode_positions_op(t, bind, t.input(normalized_coords(in.coords_b, in.width_b, in.height_b)));
    ad::Var base_a = t.input(in.base_a);
    ad::Var base_b = t.input(in.base_b);
    ad::Var fm_a0 = fuse_initial_op(t, bind, out.refined_a, base_a, pe_a);
    ad::Var fm_b0 = fuse_initial_op(t, bind, out.refined_b, base_b, pe_b);

    out.layer_outputs = run_stack_op(t, bind, fm_a0, fm_b0, cfg.layers);
    out.layer_sigmas.reserve(out.layer_outputs.size());
    for (int j = 0; j < cfg.layers; ++j) {
        out.layer_sigmas.emplace_back(matchability_op(t, bind, out.layer_outputs[j].first, j),
                                      matchability_op(t, bind, out.layer_outputs[j].second, j));
    }
    return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'I', 'F', 'C'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

nlohmann::json config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["feature_dim"] = c.feature_dim;
    j["layers"] = c.layers;
    j["gmm_k"] = c.gmm_k;
    j["base_dim"] = c.base_dim;
    j["latent_dim"] = c.latent_dim;
    j["gmm_max_iters"] = c.gmm_max_iters;
    j["gmm_tol"] = c.gmm_tol;
    j["seed"] = c.seed;
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.feature_dim = j.at("feature_dim").get<int>();
    c.layers = j.at("layers").get<int>();
    c.gmm_k = j.at("gmm_k").get<int>();
    c.base_dim = j.at("base_dim").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.gmm_max_iters = j.at("gmm_max_iters").get<int>();
    c.gmm_tol = j.at("gmm_tol").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const CheckpointMeta& meta) {
    std::ostringstream payload(std::ios::binary);
    nlohmann::json entries = nlohmann::json::array();
    for (const std::string& name : store.names()) {
        const std::streampos start = payload.tellp();
        write_tensor(payload, tensor_from_mat(store.value(name)));
        nlohmann::json e;
        e["name"] = name;
        e["offset"] = std::int64_t(start);
        e["length"] = std::int64_t(payload.tellp() - start);
        entries.push_back(std::move(e));
    }
    nlohmann::json header;
    header["schema"] = 1;
    header["meta"] = config_to_json(meta.config);
    header["meta"]["config_hash"] = meta.config_hash;
    header["meta"]["epoch"] = meta.epoch;
    header["entries"] = std::move(entries);
    const std::string hs = header.dump();
    const std::string body = payload.str();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kCheckpointMagic, 4);
    put_u32(os, std::uint32_t(hs.size()));
    os.write(hs.data(), std::streamsize(hs.size()));
    os.write(body.data(), std::streamsize(body.size()));
    if (!os) throw IoError("write failed: " + path);
}

std::pair<ParamStore, CheckpointMeta> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError(path + ": not a checkpoint file");
    const std::uint32_t hlen = get_u32(is);
    std::string hs(hlen, '\0');
    is.read(hs.data(), hlen);
    if (!is) throw FormatError(path + ": truncated header");
    nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
    if (header.is_discarded()) throw FormatError(path + ": header is not valid JSON");
    if (header.value("schema", 0) != 1) throw FormatError(path + ": unsupported schema");

    CheckpointMeta meta;
    meta.config = config_from_json(header.at("meta"));
    meta.config_hash = header["meta"].value("config_hash", "");
    meta.epoch = header["meta"].value("epoch", 0);

    const std::streampos payload_start = is.tellg();
    ParamStore store;
    for (const auto& e : header.at("entries")) {
        const std::string name = e.at("name").get<std::string>();
        const std::int64_t offset = e.at("offset").get<std::int64_t>();
        is.seekg(payload_start + std::streampos(offset));
        // read_tensor rejects trailing bytes, so parse from an extracted slice
        const std::int64_t length = e.at("length").get<std::int64_t>();
        std::string blob(std::size_t(length), '\0');
        is.read(blob.data(), length);
        if (!is) throw FormatError(path + ": truncated tensor entry " + name);
        std::istringstream slice(blob, std::ios::binary);
        store.add(name, mat_from_tensor(read_tensor(slice, path + ":" + name), name));
    }

    // integrity: the loaded names must be exactly what the config defines
    ParamStore expected;
    init_model_params(expected, meta.config);
    const auto expected_names = expected.names();
    const auto loaded_names = store.names();
    if (expected_names != loaded_names)
        throw FormatError(path + ": parameter names do not match the checkpoint config");
    for (const auto& name : expected_names) {
        if (!expected.value(name).same_shape(store.value(name)))
            throw ShapeMismatch(path + ": tensor shape mismatch for " + name);
    }
    return {std::move(store), std::move(meta)};
}

}  // namespace mif
