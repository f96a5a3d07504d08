#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tricl/mat.hpp"
#include "tricl/tape.hpp"
#include "tricl/tokenize.hpp"

namespace tricl {

enum class Modality { Image, Text, Content };

struct EncoderConfig {
    int embed_dim = 64;
    int layers = 1;   // 0 = masked mean pooling of embedded positions, no attention
    int heads = 4;
    int ffn_dim = 256;
    int joint_dim = 64;
    int text_len = kDefaultTextLength;
    int content_len = kDefaultContentLength;
    int image_h = 32, image_w = 32, image_ch = 1, patch = 8;
    int vocab_buckets = 512;

    int patch_count() const { return (image_h / patch) * (image_w / patch); }
    int patch_dim() const { return patch * patch * image_ch; }
    int head_dim() const { return embed_dim / heads; }
    int seq_len(Modality m) const;
    void validate() const;

    nlohmann::json to_json() const;
    static EncoderConfig from_json(const nlohmann::json& j);
};

struct BlockParams {
    Mat ln1_gain, ln1_bias;
    Mat wq, bq, wk, bk, wv, bv, wo, bo;
    Mat ln2_gain, ln2_bias;
    Mat ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct TowerParams {
    Mat token_table; // buckets x d (text/content towers)
    Mat patch_embed; // patch_dim x d (image tower)
    Mat pos_embed;   // seq_len x d
    Mat cls_embed;   // 1 x d
    std::vector<BlockParams> blocks;
};

struct ModelParams {
    EncoderConfig config;
    TowerParams image, text, content;
    Mat proj_image, proj_text, proj_content; // embed_dim x joint_dim, no bias
    Mat log_temp_ic, log_temp_tc;            // 1x1 log temperatures

    double temp_ic() const { return std::exp(log_temp_ic.a[0]); }
    double temp_tc() const { return std::exp(log_temp_tc.a[0]); }
};

// The two text-shaped towers (and their projections) start from one shared
// random stream, and token rows come from the token basis also used by the
// glyph renderer. That shared starting point is what lets words absent from
// training keep a usable representation, playing the role a pretrained
// backbone plays at full scale. All tensors remain independently trainable.
ModelParams init_params(const EncoderConfig& config, uint64_t seed);

// Ordered visit over every trainable tensor; the order defines both the Adam
// update order and the checkpoint layout.
void for_each_tensor(ModelParams& params,
                     const std::function<void(const std::string&, Mat&)>& fn);
void for_each_tensor(const ModelParams& params,
                     const std::function<void(const std::string&, const Mat&)>& fn);

// Tape-level forward graph. Leaves for all parameters are registered on the
// tape once; encode calls share them so gradients accumulate across a batch.
struct ModelGraph {
    Tape* tape = nullptr;
    const ModelParams* params = nullptr;
    std::map<std::string, Tape::Id> leaves;

    static ModelGraph build(Tape& tape, const ModelParams& params);
    Tape::Id leaf(const std::string& name) const;
};

Tape::Id encode_tokens_node(const ModelGraph& g, Modality which, const TokenSequence& tokens);
Tape::Id encode_patches_node(const ModelGraph& g, const PatchSequence& patches);
Tape::Id project_normalize_node(const ModelGraph& g, Modality which, Tape::Id raw);

// Convenience forward passes (fresh local tape, no gradients kept).
Vec encode_image(const PatchSequence& patches, const ModelParams& params);
Vec encode_text(const TokenSequence& tokens, const ModelParams& params);
Vec encode_content(const TokenSequence& tokens, const ModelParams& params);
Vec project_normalize(const Vec& raw, Modality which, const ModelParams& params);

// Joint-space embedding of one record side, end to end.
Vec embed_image(const Image& image, const ModelParams& params);
Vec embed_text(const std::string& text, const ModelParams& params);
Vec embed_content(const std::string& text, const ModelParams& params);

struct CheckpointProvenance {
    std::string split_name;
    std::vector<std::string> seen_classes;
    std::string channel;
    std::string corpus_manifest;
    nlohmann::json train_config_echo;
};

struct Checkpoint {
    ModelParams params;
    CheckpointProvenance provenance;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointProvenance& provenance);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace tricl
