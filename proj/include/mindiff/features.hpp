// Hashed bag-of-words text features.
#pragma once

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <vector>

namespace mindiff {

struct FeatureEntry {
    std::size_t bucket = 0;
    double count = 0.0;
};

// Sparse feature vector over a fixed hash dimension. Entries are unique,
// sorted by bucket, and carry strictly positive counts.
struct SparseFeatures {
    std::vector<FeatureEntry> entries;
    std::size_t dim = 0;
};

inline bool operator==(const FeatureEntry& a, const FeatureEntry& b) {
    return a.bucket == b.bucket && a.count == b.count;
}
inline bool operator==(const SparseFeatures& a, const SparseFeatures& b) {
    return a.dim == b.dim && a.entries == b.entries;
}

// FNV-1a, 64-bit. Fixed published constants so bucket assignments are
// reproducible across builds and languages.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace detail {
constexpr bool is_token_char(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
constexpr char ascii_lower(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}
}  // namespace detail

// Tokenizes `text` into maximal runs of (ASCII) alphanumeric characters,
// lowercases them, and accumulates token counts into `dim` buckets via
// FNV-1a mod dim. Pure and deterministic; empty text gives empty entries.
inline SparseFeatures hash_vectorize(std::string_view text, std::size_t dim) {
    SparseFeatures out;
    out.dim = dim;

    std::vector<std::size_t> buckets;
    std::string token;
    auto flush = [&] {
        if (!token.empty()) {
            buckets.push_back(static_cast<std::size_t>(fnv1a64(token) % dim));
            token.clear();
        }
    };
    for (unsigned char c : text) {
        if (detail::is_token_char(c)) {
            token.push_back(detail::ascii_lower(c));
        } else {
            flush();
        }
    }
    flush();

    std::sort(buckets.begin(), buckets.end());
    for (std::size_t i = 0; i < buckets.size();) {
        std::size_t j = i;
        while (j < buckets.size() && buckets[j] == buckets[i]) ++j;
        out.entries.push_back({buckets[i], static_cast<double>(j - i)});
        i = j;
    }
    return out;
}

}  // namespace mindiff
