#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tricl/mat.hpp"

namespace tricl {

// Dense H x W x Ch image with values in [0, 1], stored row-major (y, x, channel).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values;

    Image() = default;
    Image(int h, int w, int c)
        : height(h), width(w), channels(c),
          values(static_cast<size_t>(h) * w * c, 0.0) {}

    double& at(int y, int x, int c) {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

// Hash-bucket word map. Ids 0..2 are reserved (PAD, CLS, UNK); words map into
// [3, buckets) as a pure function of the lowercased word and the bucket count.
struct Vocabulary {
    static constexpr int kPad = 0;
    static constexpr int kCls = 1;
    static constexpr int kUnk = 2;
    static constexpr int kFirstWordId = 3;

    int buckets;

    explicit Vocabulary(int bucket_count);

    int token_id(std::string_view word) const;
    std::vector<int> encode_words(std::string_view text) const;
};

// Lowercases, splits on whitespace, and trims ASCII punctuation from token
// edges (so a templated "{label}." maps to the same id as the bare word).
std::vector<std::string> split_words(std::string_view text);

struct TokenSequence {
    std::vector<int> ids; // ids[0] == CLS, PAD-filled to a fixed length
    int length() const { return static_cast<int>(ids.size()); }
};

constexpr int kDefaultTextLength = 77;
constexpr int kDefaultContentLength = 512;

TokenSequence tokenize_to_length(std::string_view text, const Vocabulary& vocab, int length);
TokenSequence tokenize_text(std::string_view text, const Vocabulary& vocab,
                            int length = kDefaultTextLength);
TokenSequence tokenize_content(std::string_view text, const Vocabulary& vocab,
                               int length = kDefaultContentLength);

// Flattened patch grid: count = HW/P^2 patches in row-major order, each row the
// row-major flattening of its P x P x Ch block. The learned CLS slot is
// prepended by the encoder, not stored here.
struct PatchSequence {
    int count = 0;
    int dim = 0;
    Mat patches; // count x dim
};

PatchSequence patchify(const Image& image, int patch_size);

// Inverse of patchify; used to check lossless assembly.
Image unpatchify(const PatchSequence& seq, int height, int width, int channels, int patch_size);

} // namespace tricl
