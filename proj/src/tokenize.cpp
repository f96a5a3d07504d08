#include "tricl/tokenize.hpp"

#include <cctype>

#include "tricl/error.hpp"
#include "tricl/rng.hpp"

namespace tricl {

Vocabulary::Vocabulary(int bucket_count) : buckets(bucket_count) {
    if (buckets < 4)
        throw ValidationError("vocabulary buckets must be >= 4 (3 reserved ids + 1 word bucket)");
}

int Vocabulary::token_id(std::string_view word) const {
    std::string lowered(word);
    for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const uint64_t h = fnv1a64(lowered);
    return kFirstWordId + static_cast<int>(h % static_cast<uint64_t>(buckets - kFirstWordId));
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    size_t i = 0;
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    const auto is_edge_punct = [](unsigned char c) { return std::ispunct(c) != 0; };
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        size_t j = i;
        while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) {
            size_t a = i, b = j;
            while (a < b && is_edge_punct(static_cast<unsigned char>(text[a]))) ++a;
            while (b > a && is_edge_punct(static_cast<unsigned char>(text[b - 1]))) --b;
            if (b > a) {
                std::string w(text.substr(a, b - a));
                for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                words.push_back(std::move(w));
            }
        }
        i = j;
    }
    return words;
}

std::vector<int> Vocabulary::encode_words(std::string_view text) const {
    std::vector<int> ids;
    for (const std::string& w : split_words(text)) ids.push_back(token_id(w));
    return ids;
}

TokenSequence tokenize_to_length(std::string_view text, const Vocabulary& vocab, int length) {
    if (length < 1) throw ValidationError("token sequence length must be >= 1");
    TokenSequence seq;
    seq.ids.assign(static_cast<size_t>(length), Vocabulary::kPad);
    seq.ids[0] = Vocabulary::kCls;
    const std::vector<int> ids = vocab.encode_words(text);
    const int keep = std::min<int>(static_cast<int>(ids.size()), length - 1);
    for (int i = 0; i < keep; ++i) seq.ids[i + 1] = ids[i];
    return seq;
}

TokenSequence tokenize_text(std::string_view text, const Vocabulary& vocab, int length) {
    return tokenize_to_length(text, vocab, length);
}

TokenSequence tokenize_content(std::string_view text, const Vocabulary& vocab, int length) {
    return tokenize_to_length(text, vocab, length);
}

PatchSequence patchify(const Image& image, int patch_size) {
    if (patch_size <= 0) throw ValidationError("patch size must be positive");
    if (image.height % patch_size != 0 || image.width % patch_size != 0)
        throw ValidationError("image height and width must be divisible by the patch size");
    const int per_row = image.width / patch_size;
    const int per_col = image.height / patch_size;
    PatchSequence seq;
    seq.count = per_row * per_col;
    seq.dim = patch_size * patch_size * image.channels;
    seq.patches = Mat(seq.count, seq.dim);
    for (int by = 0; by < per_col; ++by) {
        for (int bx = 0; bx < per_row; ++bx) {
            double* dst = seq.patches.row_ptr(by * per_row + bx);
            int k = 0;
            for (int dy = 0; dy < patch_size; ++dy)
                for (int dx = 0; dx < patch_size; ++dx)
                    for (int c = 0; c < image.channels; ++c)
                        dst[k++] = image.at(by * patch_size + dy, bx * patch_size + dx, c);
        }
    }
    return seq;
}

Image unpatchify(const PatchSequence& seq, int height, int width, int channels, int patch_size) {
    Image img(height, width, channels);
    const int per_row = width / patch_size;
    for (int p = 0; p < seq.count; ++p) {
        const int by = p / per_row;
        const int bx = p % per_row;
        const double* src = seq.patches.row_ptr(p);
        int k = 0;
        for (int dy = 0; dy < patch_size; ++dy)
            for (int dx = 0; dx < patch_size; ++dx)
                for (int c = 0; c < channels; ++c)
                    img.at(by * patch_size + dy, bx * patch_size + dx, c) = src[k++];
    }
    return img;
}

} // namespace tricl
