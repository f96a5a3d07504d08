#include "tricl/corpus.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tricl/error.hpp"
#include "tricl/rng.hpp"

namespace tricl {

using nlohmann::json;

namespace {

constexpr char kInlinePrefix[] = "base64:";
constexpr double kPatternScale = 0.35;

const char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string make_word(Rng& rng) {
    static const char consonants[] = "bcdfgklmnprstvz";
    static const char vowels[] = "aeiou";
    const int syllables = 2 + rng.index(3);
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += consonants[rng.index(sizeof(consonants) - 1)];
        w += vowels[rng.index(sizeof(vowels) - 1)];
    }
    return w;
}

std::vector<float> image_to_f32(const Image& img) {
    std::vector<float> out(img.values.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(img.values[i]);
    return out;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

} // namespace

std::string base64_encode(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        const unsigned b0 = data[i];
        const unsigned b1 = i + 1 < len ? data[i + 1] : 0;
        const unsigned b2 = i + 2 < len ? data[i + 2] : 0;
        out += kB64Alphabet[b0 >> 2];
        out += kB64Alphabet[((b0 & 0x3) << 4) | (b1 >> 4)];
        out += i + 1 < len ? kB64Alphabet[((b1 & 0xF) << 2) | (b2 >> 6)] : '=';
        out += i + 2 < len ? kB64Alphabet[b2 & 0x3F] : '=';
    }
    return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
    int rev[256];
    std::fill(std::begin(rev), std::end(rev), -1);
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64Alphabet[i])] = i;
    std::vector<unsigned char> out;
    int acc = 0, bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = rev[static_cast<unsigned char>(c)];
        if (v < 0) throw ValidationError("invalid base64 character in inline image");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

const DocumentRecord* CorpusManifest::find_record(const std::string& id) const {
    for (const DocumentRecord& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

int CorpusManifest::class_index(const std::string& name) const {
    for (const ClassLabel& c : classes)
        if (c.name == name) return c.index;
    return -1;
}

void CorpusManifest::validate() const {
    require(!classes.empty(), "manifest has no classes");
    require(!channels.empty(), "manifest has no content channels");
    require(patch > 0 && height % patch == 0 && width % patch == 0,
            "manifest geometry not divisible by patch size");
    std::set<std::string> names;
    for (size_t i = 0; i < classes.size(); ++i) {
        require(classes[i].index == static_cast<int>(i), "class indices must be dense");
        require(names.insert(classes[i].name).second,
                "duplicate class name: " + classes[i].name);
    }
    std::set<std::string> ids;
    for (const DocumentRecord& r : records) {
        require(r.label >= 0 && r.label < static_cast<int>(classes.size()),
                "record " + r.id + " has an out-of-range label");
        require(ids.insert(r.id).second, "duplicate record id: " + r.id);
        for (const std::string& ch : channels)
            require(r.content.count(ch) > 0, "record " + r.id + " missing channel " + ch);
    }
}

void SyntheticSpec::validate() const {
    require(class_count >= 2, "synthetic spec: class_count must be >= 2");
    require(docs_per_class >= 2, "synthetic spec: docs_per_class must be >= 2");
    require(vocab_size >= 1, "synthetic spec: vocab_size must be >= 1");
    require(keywords_per_class >= 1, "synthetic spec: keywords_per_class must be >= 1");
    require(static_cast<long>(keywords_per_class) * class_count <= vocab_size,
            "synthetic spec: keywords_per_class * class_count must be <= vocab_size");
    require(noise_rate >= 0.0 && noise_rate < 1.0, "synthetic spec: noise_rate must be in [0, 1)");
    require(patch > 0, "synthetic spec: patch must be positive");
    require(height > 0 && height % patch == 0, "synthetic spec: height must be divisible by patch");
    require(width > 0 && width % patch == 0, "synthetic spec: width must be divisible by patch");
    require(image_channels >= 1, "synthetic spec: image_channels must be >= 1");
}

Image render_document_image(const std::vector<int>& token_ids, int height, int width,
                            int image_channels, int patch) {
    if (patch <= 0 || height % patch != 0 || width % patch != 0)
        throw ValidationError("render geometry not divisible by patch size");
    Image img(height, width, image_channels);
    const int per_row = width / patch;
    const int patch_count = per_row * (height / patch);
    const int dim = patch * patch * image_channels;
    const int n = std::min<int>(static_cast<int>(token_ids.size()), patch_count);
    for (int p = 0; p < n; ++p) {
        const int by = p / per_row;
        const int bx = p % per_row;
        const uint32_t tid = static_cast<uint32_t>(token_ids[p]);
        int k = 0;
        for (int dy = 0; dy < patch; ++dy)
            for (int dx = 0; dx < patch; ++dx)
                for (int c = 0; c < image_channels; ++c) {
                    double v = 0.5 + kPatternScale * token_basis_normal(tid, k++);
                    img.at(by * patch + dy, bx * patch + dx, c) = std::clamp(v, 0.0, 1.0);
                }
    }
    return img;
}

GeneratedCorpus generate_synthetic_corpus(const SyntheticSpec& spec, const Vocabulary& vocab,
                                          const std::filesystem::path& out_dir,
                                          bool inline_images) {
    spec.validate();

    // Distinct pseudo-words with distinct hash buckets. A collision means the
    // tokenizer would merge two corpus words, so the colliding word is redrawn;
    // if the budget runs out the bucket count is simply too small.
    Rng word_rng(mix_seed(spec.seed, "corpus.words"));
    std::vector<std::string> words;
    std::set<std::string> seen_words;
    std::set<int> seen_buckets;
    int attempts = 0;
    const int max_attempts = spec.vocab_size * 1000 + 1000;
    while (static_cast<int>(words.size()) < spec.vocab_size) {
        if (++attempts > max_attempts)
            throw ValidationError(
                "could not build a collision-free vocabulary; increase vocab buckets "
                "(currently " + std::to_string(vocab.buckets) + ", want >= 4x vocab_size)");
        std::string w = make_word(word_rng);
        if (!seen_words.insert(w).second) continue;
        const int bucket = vocab.token_id(w);
        if (!seen_buckets.insert(bucket).second) continue;
        words.push_back(std::move(w));
    }

    // Disjoint keyword sets; a class is named after its first keyword.
    std::vector<int> order(words.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng alloc_rng(mix_seed(spec.seed, "corpus.alloc"));
    alloc_rng.shuffle(order);
    std::vector<std::vector<std::string>> class_keywords(spec.class_count);
    for (int k = 0; k < spec.class_count; ++k)
        for (int j = 0; j < spec.keywords_per_class; ++j)
            class_keywords[k].push_back(words[order[k * spec.keywords_per_class + j]]);

    CorpusManifest manifest;
    manifest.base_dir = out_dir;
    manifest.height = spec.height;
    manifest.width = spec.width;
    manifest.channels_per_pixel = spec.image_channels;
    manifest.patch = spec.patch;
    manifest.channels = {kCleanChannel, kNoisyChannel};
    for (int k = 0; k < spec.class_count; ++k)
        manifest.classes.push_back({k, class_keywords[k][0]});

    std::filesystem::create_directories(out_dir);
    if (!inline_images) std::filesystem::create_directories(out_dir / "images");
    const std::filesystem::path manifest_path = out_dir / "manifest.jsonl";
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write " + manifest_path.string());

    json header;
    header["classes"] = json::array();
    for (const ClassLabel& c : manifest.classes) header["classes"].push_back(c.name);
    header["channels"] = manifest.channels;
    header["H"] = spec.height;
    header["W"] = spec.width;
    header["Ch"] = spec.image_channels;
    header["P"] = spec.patch;
    out << header.dump() << "\n";

    const int tokens_per_doc = manifest.patch_count();
    const double corrupt_rate = std::min(1.0, 2.0 * spec.noise_rate);
    int global = 0;
    for (int k = 0; k < spec.class_count; ++k) {
        for (int d = 0; d < spec.docs_per_class; ++d, ++global) {
            Rng doc_rng(mix_seed(spec.seed, "corpus.doc", static_cast<uint64_t>(global)));
            std::vector<std::string> tokens;
            for (int t = 0; t < tokens_per_doc; ++t) {
                if (doc_rng.uniform() < spec.noise_rate)
                    tokens.push_back(words[doc_rng.index(words.size())]);
                else
                    tokens.push_back(class_keywords[k][doc_rng.index(class_keywords[k].size())]);
            }

            std::string clean;
            for (size_t t = 0; t < tokens.size(); ++t) {
                if (t) clean += ' ';
                clean += tokens[t];
            }

            Rng noise_rng(mix_seed(spec.seed, "corpus.noisy", static_cast<uint64_t>(global)));
            std::string noisy = clean;
            for (char& c : noisy) {
                if (c == ' ') continue;
                if (noise_rng.uniform() < corrupt_rate)
                    c = static_cast<char>('a' + noise_rng.index(26));
            }

            std::vector<int> ids;
            for (const std::string& t : tokens) ids.push_back(vocab.token_id(t));
            const Image img = render_document_image(ids, spec.height, spec.width,
                                                    spec.image_channels, spec.patch);

            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "doc_%02d_%04d", k, d);
            DocumentRecord rec;
            rec.id = idbuf;
            rec.label = k;
            rec.content[kCleanChannel] = clean;
            rec.content[kNoisyChannel] = noisy;

            const std::vector<float> f32 = image_to_f32(img);
            if (inline_images) {
                rec.image_ref = std::string(kInlinePrefix) +
                                base64_encode(reinterpret_cast<const unsigned char*>(f32.data()),
                                              f32.size() * sizeof(float));
            } else {
                rec.image_ref = std::string("images/") + rec.id + ".f32";
                std::ofstream imf(out_dir / rec.image_ref, std::ios::binary | std::ios::trunc);
                require(imf.good(), "cannot write image file for " + rec.id);
                imf.write(reinterpret_cast<const char*>(f32.data()),
                          static_cast<std::streamsize>(f32.size() * sizeof(float)));
            }

            json line;
            line["id"] = rec.id;
            line["label"] = manifest.classes[k].name;
            line["image"] = rec.image_ref;
            line["content"] = rec.content;
            out << line.dump() << "\n";
            manifest.records.push_back(std::move(rec));
        }
    }
    out.close();
    manifest.validate();
    return GeneratedCorpus{std::move(manifest), manifest_path, std::move(class_keywords),
                           std::move(words)};
}

CorpusManifest load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in.good()) throw ValidationError("cannot open manifest: " + manifest_path.string());

    CorpusManifest manifest;
    manifest.base_dir = manifest_path.parent_path();

    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": malformed JSON (" + e.what() + ")");
        }
        if (!have_header) {
            try {
                int idx = 0;
                for (const auto& name : j.at("classes"))
                    manifest.classes.push_back({idx++, name.get<std::string>()});
                manifest.channels = j.at("channels").get<std::vector<std::string>>();
                manifest.height = j.at("H").get<int>();
                manifest.width = j.at("W").get<int>();
                manifest.channels_per_pixel = j.at("Ch").get<int>();
                manifest.patch = j.at("P").get<int>();
            } catch (const json::exception& e) {
                throw ValidationError("manifest line 1: bad header (" + std::string(e.what()) + ")");
            }
            have_header = true;
            continue;
        }
        DocumentRecord rec;
        try {
            rec.id = j.at("id").get<std::string>();
            const std::string label_name = j.at("label").get<std::string>();
            rec.label = manifest.class_index(label_name);
            if (rec.label < 0)
                throw ValidationError("manifest line " + std::to_string(line_no) +
                                      ": unknown label '" + label_name + "'");
            rec.image_ref = j.at("image").get<std::string>();
            rec.content = j.at("content").get<std::map<std::string, std::string>>();
        } catch (const json::exception& e) {
            throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        for (const std::string& ch : manifest.channels)
            if (!rec.content.count(ch))
                throw ValidationError("manifest line " + std::to_string(line_no) +
                                      ": record missing channel '" + ch + "'");
        manifest.records.push_back(std::move(rec));
    }
    if (!have_header) throw ValidationError("manifest is empty: " + manifest_path.string());
    if (manifest.records.empty()) throw ValidationError("manifest has no records");
    manifest.validate();
    return manifest;
}

Image load_record_image(const CorpusManifest& manifest, const DocumentRecord& record) {
    const size_t expected =
        static_cast<size_t>(manifest.height) * manifest.width * manifest.channels_per_pixel;
    std::vector<unsigned char> bytes;
    if (record.image_ref.rfind(kInlinePrefix, 0) == 0) {
        bytes = base64_decode(std::string_view(record.image_ref).substr(sizeof(kInlinePrefix) - 1));
    } else {
        const std::filesystem::path p = manifest.base_dir / record.image_ref;
        std::ifstream in(p, std::ios::binary);
        if (!in.good()) throw ValidationError("cannot open image file: " + p.string());
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    if (bytes.size() != expected * sizeof(float))
        throw ValidationError("image data for record " + record.id + " has wrong size");
    Image img(manifest.height, manifest.width, manifest.channels_per_pixel);
    for (size_t i = 0; i < expected; ++i) {
        float f;
        std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
        img.values[i] = static_cast<double>(f);
        if (!std::isfinite(img.values[i]))
            throw ValidationError("image for record " + record.id + " contains non-finite values");
    }
    return img;
}

DatasetView select_channel(const CorpusManifest& manifest, const std::string& channel) {
    if (std::find(manifest.channels.begin(), manifest.channels.end(), channel) ==
        manifest.channels.end()) {
        std::string available;
        for (size_t i = 0; i < manifest.channels.size(); ++i) {
            if (i) available += ", ";
            available += manifest.channels[i];
        }
        throw ValidationError("unknown content channel '" + channel + "'; available: {" +
                              available + "}");
    }
    DatasetView view;
    view.manifest = &manifest;
    view.channel = channel;
    view.record_indices.resize(manifest.records.size());
    for (size_t i = 0; i < manifest.records.size(); ++i)
        view.record_indices[i] = static_cast<int>(i);
    return view;
}

DatasetView DatasetView::with_labels(const std::vector<int>& label_set) const {
    DatasetView out;
    out.manifest = manifest;
    out.channel = channel;
    for (int idx : record_indices)
        if (std::find(label_set.begin(), label_set.end(), manifest->records[idx].label) !=
            label_set.end())
            out.record_indices.push_back(idx);
    return out;
}

DatasetView DatasetView::with_indices(std::vector<int> indices) const {
    DatasetView out;
    out.manifest = manifest;
    out.channel = channel;
    out.record_indices = std::move(indices);
    return out;
}

} // namespace tricl
