#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tricl/tokenize.hpp"

namespace tricl {

struct ClassLabel {
    int index = 0;
    std::string name;
};

// One (image, label, content-per-channel) triple. The image is referenced by a
// path relative to the manifest, or carried inline as "base64:<float32 data>".
struct DocumentRecord {
    std::string id;
    int label = 0;
    std::string image_ref;
    std::map<std::string, std::string> content;
};

struct CorpusManifest {
    std::filesystem::path base_dir;
    std::vector<ClassLabel> classes;
    std::vector<std::string> channels;
    int height = 0, width = 0, channels_per_pixel = 0, patch = 0;
    std::vector<DocumentRecord> records;

    int patch_count() const { return (height / patch) * (width / patch); }
    const DocumentRecord* find_record(const std::string& id) const;
    int class_index(const std::string& name) const; // -1 if unknown
    void validate() const;
};

Image load_record_image(const CorpusManifest& manifest, const DocumentRecord& record);

struct SyntheticSpec {
    int class_count = 16;
    int docs_per_class = 50;
    int vocab_size = 128;
    int keywords_per_class = 4;
    double noise_rate = 0.1;
    uint64_t seed = 0;
    int height = 32, width = 32, image_channels = 1, patch = 8;

    void validate() const;
};

inline constexpr const char* kCleanChannel = "clean";
inline constexpr const char* kNoisyChannel = "noisy";

// Deterministic procedural rendering: patch j shows the glyph of token id j
// (a fixed hash-to-pattern map over the shared token basis); leftover patches
// stay blank. Token lists longer than the patch grid are truncated.
Image render_document_image(const std::vector<int>& token_ids, int height, int width,
                            int image_channels, int patch);

struct GeneratedCorpus {
    CorpusManifest manifest;
    std::filesystem::path manifest_path;
    std::vector<std::vector<std::string>> class_keywords; // per class
    std::vector<std::string> vocabulary_words;
};

// Writes manifest.jsonl (+ images/) under out_dir. Deterministic in spec.seed:
// re-running with the same spec produces byte-identical files.
GeneratedCorpus generate_synthetic_corpus(const SyntheticSpec& spec, const Vocabulary& vocab,
                                          const std::filesystem::path& out_dir,
                                          bool inline_images = false);

CorpusManifest load_manifest(const std::filesystem::path& manifest_path);

// A channel-bound, optionally filtered view over a manifest. Cheap to copy;
// the manifest outlives every view.
struct DatasetView {
    const CorpusManifest* manifest = nullptr;
    std::string channel;
    std::vector<int> record_indices;

    const DocumentRecord& record(int i) const { return manifest->records[record_indices[i]]; }
    const std::string& content(int i) const { return record(i).content.at(channel); }
    int size() const { return static_cast<int>(record_indices.size()); }
    DatasetView with_labels(const std::vector<int>& label_set) const;
    DatasetView with_indices(std::vector<int> indices) const;
};

DatasetView select_channel(const CorpusManifest& manifest, const std::string& channel);

std::string base64_encode(const unsigned char* data, size_t len);
std::vector<unsigned char> base64_decode(std::string_view text);

} // namespace tricl
