#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tricl/corpus.hpp"

namespace tricl {

// Disjoint, exhaustive partition of class indices into seen/unseen sets.
struct SplitSpec {
    std::string name;
    std::vector<int> seen;   // ascending class indices
    std::vector<int> unseen; // ascending class indices

    bool is_seen(int label) const;
};

// Classes with a baseline accuracy, ascending by accuracy; ties break toward
// the lower class index.
struct RankOrdering {
    std::vector<std::pair<ClassLabel, double>> entries;
};

// The canonical 16-class document type order under which the standard
// four-class unseen blocks are consecutive.
const std::vector<std::string>& rvl_cdip_class_order();

std::vector<SplitSpec> make_sequential_splits(const std::vector<ClassLabel>& classes,
                                              int group_size);

struct IncrementalBounds {
    int min_unseen = 2;
    int max_unseen = 8;
};

SplitSpec make_incremental_split(const RankOrdering& ranking, int unseen_count,
                                 const IncrementalBounds& bounds = {});

RankOrdering make_rank_ordering(const std::vector<ClassLabel>& classes,
                                const std::vector<double>& accuracy_percent);

RankOrdering load_rank_ordering(const std::filesystem::path& csv_path,
                                const std::vector<ClassLabel>& classes);

void save_rank_ordering(const std::filesystem::path& csv_path, const RankOrdering& ranking);

std::vector<std::string> validate_split(const SplitSpec& split, const CorpusManifest& manifest);

void save_split(const std::filesystem::path& path, const SplitSpec& split,
                const std::vector<ClassLabel>& classes);
SplitSpec load_split(const std::filesystem::path& path, const std::vector<ClassLabel>& classes);

} // namespace tricl
