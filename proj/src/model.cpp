#include "tricl/model.hpp"

#include <cstring>
#include <fstream>

#include "tricl/error.hpp"
#include "tricl/rng.hpp"

namespace tricl {

using nlohmann::json;

int EncoderConfig::seq_len(Modality m) const {
    switch (m) {
        case Modality::Image: return patch_count() + 1; // learned CLS slot + patches
        case Modality::Text: return text_len;           // CLS is ids[0]
        case Modality::Content: return content_len;
    }
    return 0;
}

void EncoderConfig::validate() const {
    if (embed_dim < 1) throw ValidationError("encoder: embed_dim must be >= 1");
    if (joint_dim < 1) throw ValidationError("encoder: joint_dim must be >= 1");
    if (layers < 0) throw ValidationError("encoder: layers must be >= 0");
    if (layers > 0) {
        if (heads < 1) throw ValidationError("encoder: heads must be >= 1");
        if (embed_dim % heads != 0)
            throw ValidationError("encoder: embed_dim must be divisible by heads");
        if (ffn_dim < 1) throw ValidationError("encoder: ffn_dim must be >= 1");
    }
    if (text_len < 2) throw ValidationError("encoder: text_len must be >= 2");
    if (content_len < 2) throw ValidationError("encoder: content_len must be >= 2");
    if (vocab_buckets < 4) throw ValidationError("encoder: vocab_buckets must be >= 4");
    if (patch <= 0 || image_h % patch != 0 || image_w % patch != 0)
        throw ValidationError("encoder: image geometry must be divisible by patch");
    if (image_ch < 1) throw ValidationError("encoder: image_ch must be >= 1");
}

json EncoderConfig::to_json() const {
    return json{{"embed_dim", embed_dim},   {"layers", layers},
                {"heads", heads},           {"ffn_dim", ffn_dim},
                {"joint_dim", joint_dim},   {"text_len", text_len},
                {"content_len", content_len}, {"image_h", image_h},
                {"image_w", image_w},       {"image_ch", image_ch},
                {"patch", patch},           {"vocab_buckets", vocab_buckets}};
}

EncoderConfig EncoderConfig::from_json(const json& j) {
    EncoderConfig c;
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
    c.joint_dim = j.value("joint_dim", c.joint_dim);
    c.text_len = j.value("text_len", c.text_len);
    c.content_len = j.value("content_len", c.content_len);
    c.image_h = j.value("image_h", c.image_h);
    c.image_w = j.value("image_w", c.image_w);
    c.image_ch = j.value("image_ch", c.image_ch);
    c.patch = j.value("patch", c.patch);
    c.vocab_buckets = j.value("vocab_buckets", c.vocab_buckets);
    c.validate();
    return c;
}

namespace {

Mat normal_mat(int rows, int cols, double stddev, uint64_t seed) {
    Mat m(rows, cols);
    Rng rng(seed);
    for (double& x : m.a) x = rng.normal(0.0, stddev);
    return m;
}

Mat token_table_from_basis(int buckets, int dim) {
    Mat m(buckets, dim);
    for (int t = 0; t < buckets; ++t) {
        double* row = m.row_ptr(t);
        for (int k = 0; k < dim; ++k)
            row[k] = 0.02 * token_basis_normal(static_cast<uint32_t>(t), k);
    }
    return m;
}

// Positionwise stream so that towers with different context lengths share the
// initialization of their common prefix.
Mat pos_embed_mat(int rows, int dim, uint64_t seed, const std::string& stream) {
    Mat m(rows, dim);
    for (int r = 0; r < rows; ++r) {
        Rng rng(mix_seed(seed, stream, static_cast<uint64_t>(r)));
        double* row = m.row_ptr(r);
        for (int k = 0; k < dim; ++k) row[k] = rng.normal(0.0, 0.01);
    }
    return m;
}

BlockParams init_block(const EncoderConfig& cfg, uint64_t seed, const std::string& stream,
                       int layer) {
    const int d = cfg.embed_dim;
    const double w_std = 1.0 / std::sqrt(static_cast<double>(d));
    const double ffn2_std = 1.0 / std::sqrt(static_cast<double>(cfg.ffn_dim));
    const auto sub = [&](const char* name) {
        return mix_seed(seed, stream + ".block" + std::to_string(layer) + "." + name);
    };
    BlockParams b;
    b.ln1_gain = Mat(1, d);
    b.ln1_bias = Mat(1, d);
    b.ln2_gain = Mat(1, d);
    b.ln2_bias = Mat(1, d);
    std::fill(b.ln1_gain.a.begin(), b.ln1_gain.a.end(), 1.0);
    std::fill(b.ln2_gain.a.begin(), b.ln2_gain.a.end(), 1.0);
    b.wq = normal_mat(d, d, w_std, sub("wq"));
    b.wk = normal_mat(d, d, w_std, sub("wk"));
    b.wv = normal_mat(d, d, w_std, sub("wv"));
    b.wo = normal_mat(d, d, w_std, sub("wo"));
    b.bq = Mat(1, d);
    b.bk = Mat(1, d);
    b.bv = Mat(1, d);
    b.bo = Mat(1, d);
    b.ffn_w1 = normal_mat(d, cfg.ffn_dim, w_std, sub("ffn_w1"));
    b.ffn_b1 = Mat(1, cfg.ffn_dim);
    b.ffn_w2 = normal_mat(cfg.ffn_dim, d, ffn2_std, sub("ffn_w2"));
    b.ffn_b2 = Mat(1, d);
    return b;
}

TowerParams init_tower(const EncoderConfig& cfg, Modality m, uint64_t seed,
                       const std::string& stream) {
    TowerParams t;
    const int d = cfg.embed_dim;
    if (m == Modality::Image) {
        t.patch_embed = normal_mat(cfg.patch_dim(), d,
                                   1.0 / std::sqrt(static_cast<double>(cfg.patch_dim())),
                                   mix_seed(seed, stream + ".patch_embed"));
    } else {
        t.token_table = token_table_from_basis(cfg.vocab_buckets, d);
    }
    t.pos_embed = pos_embed_mat(cfg.seq_len(m), d, seed, stream + ".pos");
    t.cls_embed = normal_mat(1, d, 0.02, mix_seed(seed, stream + ".cls"));
    for (int l = 0; l < cfg.layers; ++l) t.blocks.push_back(init_block(cfg, seed, stream, l));
    return t;
}

} // namespace

ModelParams init_params(const EncoderConfig& config, uint64_t seed) {
    config.validate();
    ModelParams p;
    p.config = config;
    p.image = init_tower(config, Modality::Image, seed, "image");
    p.text = init_tower(config, Modality::Text, seed, "lang");
    p.content = init_tower(config, Modality::Content, seed, "lang");
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
    p.proj_image = normal_mat(config.embed_dim, config.joint_dim, proj_std,
                              mix_seed(seed, "proj.image"));
    p.proj_text = normal_mat(config.embed_dim, config.joint_dim, proj_std,
                             mix_seed(seed, "proj.lang"));
    p.proj_content = p.proj_text;
    p.log_temp_ic = Mat(1, 1);
    p.log_temp_tc = Mat(1, 1);
    p.log_temp_ic.a[0] = std::log(0.07);
    p.log_temp_tc.a[0] = std::log(0.07);
    return p;
}

namespace {

template <class Params, class Fn>
void visit_tensors(Params& p, const Fn& fn) {
    const auto tower = [&](const char* prefix, auto& t) {
        const std::string pre(prefix);
        if (!t.token_table.empty()) fn(pre + ".token_table", t.token_table);
        if (!t.patch_embed.empty()) fn(pre + ".patch_embed", t.patch_embed);
        fn(pre + ".pos_embed", t.pos_embed);
        fn(pre + ".cls_embed", t.cls_embed);
        for (size_t l = 0; l < t.blocks.size(); ++l) {
            auto& b = t.blocks[l];
            const std::string bp = pre + ".block" + std::to_string(l);
            fn(bp + ".ln1_gain", b.ln1_gain);
            fn(bp + ".ln1_bias", b.ln1_bias);
            fn(bp + ".wq", b.wq);
            fn(bp + ".bq", b.bq);
            fn(bp + ".wk", b.wk);
            fn(bp + ".bk", b.bk);
            fn(bp + ".wv", b.wv);
            fn(bp + ".bv", b.bv);
            fn(bp + ".wo", b.wo);
            fn(bp + ".bo", b.bo);
            fn(bp + ".ln2_gain", b.ln2_gain);
            fn(bp + ".ln2_bias", b.ln2_bias);
            fn(bp + ".ffn_w1", b.ffn_w1);
            fn(bp + ".ffn_b1", b.ffn_b1);
            fn(bp + ".ffn_w2", b.ffn_w2);
            fn(bp + ".ffn_b2", b.ffn_b2);
        }
    };
    tower("image", p.image);
    tower("text", p.text);
    tower("content", p.content);
    fn("proj.image", p.proj_image);
    fn("proj.text", p.proj_text);
    fn("proj.content", p.proj_content);
    fn("log_temp_ic", p.log_temp_ic);
    fn("log_temp_tc", p.log_temp_tc);
}

} // namespace

void for_each_tensor(ModelParams& params,
                     const std::function<void(const std::string&, Mat&)>& fn) {
    visit_tensors(params, fn);
}

void for_each_tensor(const ModelParams& params,
                     const std::function<void(const std::string&, const Mat&)>& fn) {
    visit_tensors(params, fn);
}

ModelGraph ModelGraph::build(Tape& tape, const ModelParams& params) {
    ModelGraph g;
    g.tape = &tape;
    g.params = &params;
    for_each_tensor(params, [&](const std::string& name, const Mat& m) {
        g.leaves.emplace(name, tape.leaf(m));
    });
    return g;
}

Tape::Id ModelGraph::leaf(const std::string& name) const {
    auto it = leaves.find(name);
    if (it == leaves.end()) throw std::logic_error("unknown tensor leaf: " + name);
    return it->second;
}

namespace {

const char* tower_prefix(Modality m) {
    switch (m) {
        case Modality::Image: return "image";
        case Modality::Text: return "text";
        case Modality::Content: return "content";
    }
    return "";
}

// Shared trunk: embedded sequence with a validity mask. Position 0 is the CLS
// slot and always valid; PAD token positions are masked out of attention keys
// and out of the mean-pool fallback.
Tape::Id encode_sequence(const ModelGraph& g, Modality which, Tape::Id embedded,
                         const std::vector<uint8_t>& valid) {
    Tape& t = *g.tape;
    const EncoderConfig& cfg = g.params->config;
    const std::string pre = tower_prefix(which);

    if (cfg.layers == 0) return t.mean_rows_masked(embedded, valid);

    Tape::Id x = t.add(embedded, g.leaf(pre + ".pos_embed"));
    constexpr double ln_eps = 1e-5;
    const int dh = cfg.head_dim();
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string bp = pre + ".block" + std::to_string(l);
        Tape::Id h = t.layer_norm_rows(x, g.leaf(bp + ".ln1_gain"), g.leaf(bp + ".ln1_bias"),
                                       ln_eps);
        Tape::Id q = t.add_row(t.matmul(h, g.leaf(bp + ".wq")), g.leaf(bp + ".bq"));
        Tape::Id k = t.add_row(t.matmul(h, g.leaf(bp + ".wk")), g.leaf(bp + ".bk"));
        Tape::Id v = t.add_row(t.matmul(h, g.leaf(bp + ".wv")), g.leaf(bp + ".bv"));
        std::vector<Tape::Id> heads;
        for (int hd = 0; hd < cfg.heads; ++hd) {
            Tape::Id qh = t.col_slice(q, hd * dh, (hd + 1) * dh);
            Tape::Id kh = t.col_slice(k, hd * dh, (hd + 1) * dh);
            Tape::Id vh = t.col_slice(v, hd * dh, (hd + 1) * dh);
            Tape::Id scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
            Tape::Id probs = t.softmax_rows_masked(scores, valid);
            heads.push_back(t.matmul(probs, vh));
        }
        Tape::Id ctx = cfg.heads == 1 ? heads[0] : t.hcat(heads);
        Tape::Id attn = t.add_row(t.matmul(ctx, g.leaf(bp + ".wo")), g.leaf(bp + ".bo"));
        x = t.add(x, attn);
        Tape::Id h2 = t.layer_norm_rows(x, g.leaf(bp + ".ln2_gain"), g.leaf(bp + ".ln2_bias"),
                                        ln_eps);
        Tape::Id f = t.add_row(t.matmul(h2, g.leaf(bp + ".ffn_w1")), g.leaf(bp + ".ffn_b1"));
        f = t.gelu(f);
        f = t.add_row(t.matmul(f, g.leaf(bp + ".ffn_w2")), g.leaf(bp + ".ffn_b2"));
        x = t.add(x, f);
    }
    return t.row(x, 0);
}

} // namespace

Tape::Id encode_tokens_node(const ModelGraph& g, Modality which, const TokenSequence& tokens) {
    if (which == Modality::Image)
        throw ValidationError("encode_tokens_node: image modality takes patches");
    Tape& t = *g.tape;
    const EncoderConfig& cfg = g.params->config;
    const int expect = cfg.seq_len(which);
    if (tokens.length() != expect)
        throw ValidationError("token sequence length " + std::to_string(tokens.length()) +
                              " does not match configured context length " +
                              std::to_string(expect));
    if (tokens.ids[0] != Vocabulary::kCls)
        throw ValidationError("token sequence must start with CLS");
    const std::string pre = tower_prefix(which);
    std::vector<int> rest(tokens.ids.begin() + 1, tokens.ids.end());
    for (int id : rest)
        if (id < 0 || id >= cfg.vocab_buckets)
            throw ValidationError("token id out of range for vocabulary");
    Tape::Id emb = t.gather_rows(g.leaf(pre + ".token_table"), rest);
    Tape::Id seq = t.vcat2(g.leaf(pre + ".cls_embed"), emb);
    std::vector<uint8_t> valid(tokens.ids.size(), 0);
    valid[0] = 1;
    for (size_t i = 1; i < tokens.ids.size(); ++i)
        valid[i] = tokens.ids[i] != Vocabulary::kPad ? 1 : 0;
    return encode_sequence(g, which, seq, valid);
}

Tape::Id encode_patches_node(const ModelGraph& g, const PatchSequence& patches) {
    Tape& t = *g.tape;
    const EncoderConfig& cfg = g.params->config;
    if (patches.count != cfg.patch_count() || patches.dim != cfg.patch_dim())
        throw ValidationError("patch sequence does not match configured image geometry");
    Tape::Id pat = t.leaf(patches.patches);
    Tape::Id emb = t.matmul(pat, g.leaf("image.patch_embed"));
    Tape::Id seq = t.vcat2(g.leaf("image.cls_embed"), emb);
    std::vector<uint8_t> valid(static_cast<size_t>(patches.count) + 1, 1);
    return encode_sequence(g, Modality::Image, seq, valid);
}

Tape::Id project_normalize_node(const ModelGraph& g, Modality which, Tape::Id raw) {
    Tape& t = *g.tape;
    const char* proj_name = which == Modality::Image ? "proj.image"
                            : which == Modality::Text ? "proj.text"
                                                      : "proj.content";
    return t.l2_normalize_rows(t.matmul(raw, g.leaf(proj_name)));
}

namespace {

Vec run_forward(const ModelParams& params,
                const std::function<Tape::Id(const ModelGraph&)>& build) {
    Tape tape;
    ModelGraph g = ModelGraph::build(tape, params);
    const Tape::Id out = build(g);
    return tape.val(out).row_vec(0);
}

} // namespace

Vec encode_image(const PatchSequence& patches, const ModelParams& params) {
    return run_forward(params,
                       [&](const ModelGraph& g) { return encode_patches_node(g, patches); });
}

Vec encode_text(const TokenSequence& tokens, const ModelParams& params) {
    return run_forward(params, [&](const ModelGraph& g) {
        return encode_tokens_node(g, Modality::Text, tokens);
    });
}

Vec encode_content(const TokenSequence& tokens, const ModelParams& params) {
    return run_forward(params, [&](const ModelGraph& g) {
        return encode_tokens_node(g, Modality::Content, tokens);
    });
}

Vec project_normalize(const Vec& raw, Modality which, const ModelParams& params) {
    for (double x : raw)
        if (!std::isfinite(x)) throw ValidationError("project_normalize: non-finite input");
    return run_forward(params, [&](const ModelGraph& g) {
        return project_normalize_node(g, which, g.tape->leaf(Mat::from_row(raw)));
    });
}

Vec embed_image(const Image& image, const ModelParams& params) {
    return run_forward(params, [&](const ModelGraph& g) {
        return project_normalize_node(
            g, Modality::Image, encode_patches_node(g, patchify(image, params.config.patch)));
    });
}

Vec embed_text(const std::string& text, const ModelParams& params) {
    const Vocabulary vocab(params.config.vocab_buckets);
    const TokenSequence seq = tokenize_text(text, vocab, params.config.text_len);
    return run_forward(params, [&](const ModelGraph& g) {
        return project_normalize_node(g, Modality::Text,
                                      encode_tokens_node(g, Modality::Text, seq));
    });
}

Vec embed_content(const std::string& text, const ModelParams& params) {
    const Vocabulary vocab(params.config.vocab_buckets);
    const TokenSequence seq = tokenize_content(text, vocab, params.config.content_len);
    return run_forward(params, [&](const ModelGraph& g) {
        return project_normalize_node(g, Modality::Content,
                                      encode_tokens_node(g, Modality::Content, seq));
    });
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: magic + version, a JSON directory, then raw float64 data.

namespace {
constexpr char kMagic[8] = {'T', 'R', 'I', 'C', 'L', 'C', 'K', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointProvenance& provenance) {
    json header;
    header["format"] = "tricl-checkpoint";
    header["version"] = 1;
    header["encoder"] = params.config.to_json();
    header["provenance"] = {{"split", provenance.split_name},
                            {"seen_classes", provenance.seen_classes},
                            {"channel", provenance.channel},
                            {"corpus_manifest", provenance.corpus_manifest},
                            {"train_config", provenance.train_config_echo}};
    json tensors = json::array();
    uint64_t offset = 0;
    for_each_tensor(params, [&](const std::string& name, const Mat& m) {
        tensors.push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}, {"offset", offset}});
        offset += m.size() * sizeof(double);
    });
    header["tensors"] = tensors;
    const std::string hs = header.dump();

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out.good()) throw ValidationError("cannot write checkpoint: " + tmp.string());
        out.write(kMagic, sizeof(kMagic));
        const uint64_t hlen = hs.size();
        out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
        out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for_each_tensor(params, [&](const std::string&, const Mat& m) {
            out.write(reinterpret_cast<const char*>(m.a.data()),
                      static_cast<std::streamsize>(m.size() * sizeof(double)));
        });
        if (!out.good()) throw ValidationError("failed writing checkpoint: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw ValidationError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in.good() || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ValidationError("not a checkpoint file: " + path.string());
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        throw ValidationError("checkpoint header is corrupt: " + std::string(e.what()));
    }
    if (header.value("version", 0) != 1)
        throw ValidationError("unsupported checkpoint version");

    Checkpoint ck;
    ck.params = init_params(EncoderConfig::from_json(header.at("encoder")), 0);
    const json& prov = header.at("provenance");
    ck.provenance.split_name = prov.value("split", "");
    ck.provenance.seen_classes = prov.value("seen_classes", std::vector<std::string>{});
    ck.provenance.channel = prov.value("channel", "");
    ck.provenance.corpus_manifest = prov.value("corpus_manifest", "");
    ck.provenance.train_config_echo = prov.value("train_config", json::object());

    std::map<std::string, std::pair<int, int>> shapes;
    for (const auto& t : header.at("tensors"))
        shapes[t.at("name").get<std::string>()] = {t.at("rows").get<int>(),
                                                   t.at("cols").get<int>()};
    for_each_tensor(ck.params, [&](const std::string& name, Mat& m) {
        auto it = shapes.find(name);
        if (it == shapes.end())
            throw ValidationError("checkpoint missing tensor: " + name);
        if (it->second.first != m.rows || it->second.second != m.cols)
            throw ValidationError("checkpoint tensor shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(m.a.data()),
                static_cast<std::streamsize>(m.size() * sizeof(double)));
    });
    if (!in.good()) throw ValidationError("checkpoint data is truncated: " + path.string());
    return ck;
}

} // namespace tricl
