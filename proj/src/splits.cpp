#include "tricl/splits.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tricl/error.hpp"

namespace tricl {

using nlohmann::json;

bool SplitSpec::is_seen(int label) const {
    return std::find(seen.begin(), seen.end(), label) != seen.end();
}

const std::vector<std::string>& rvl_cdip_class_order() {
    static const std::vector<std::string> order = {
        "letter",
        "form",
        "email",
        "handwritten",
        "advertisement",
        "scientific report",
        "scientific publication",
        "specification",
        "file folder",
        "news article",
        "budget",
        "invoice",
        "presentation",
        "questionnaire",
        "resume",
        "memo",
    };
    return order;
}

std::vector<SplitSpec> make_sequential_splits(const std::vector<ClassLabel>& classes,
                                              int group_size) {
    const int k = static_cast<int>(classes.size());
    if (group_size <= 0 || k % group_size != 0)
        throw ValidationError("class count (" + std::to_string(k) +
                              ") is not divisible by group size (" + std::to_string(group_size) +
                              ")");
    std::vector<SplitSpec> splits;
    const int n_splits = k / group_size;
    for (int s = 0; s < n_splits; ++s) {
        SplitSpec split;
        split.name = s < 26 ? std::string(1, static_cast<char>('A' + s))
                            : "S" + std::to_string(s + 1);
        for (int i = 0; i < k; ++i) {
            if (i / group_size == s)
                split.unseen.push_back(classes[i].index);
            else
                split.seen.push_back(classes[i].index);
        }
        std::sort(split.seen.begin(), split.seen.end());
        std::sort(split.unseen.begin(), split.unseen.end());
        splits.push_back(std::move(split));
    }
    return splits;
}

RankOrdering make_rank_ordering(const std::vector<ClassLabel>& classes,
                                const std::vector<double>& accuracy_percent) {
    if (classes.size() != accuracy_percent.size())
        throw ValidationError("rank ordering needs one accuracy per class");
    RankOrdering ranking;
    for (size_t i = 0; i < classes.size(); ++i) {
        const double acc = accuracy_percent[i];
        if (acc < 0.0 || acc > 100.0)
            throw ValidationError("accuracy for class '" + classes[i].name +
                                  "' out of [0, 100]: " + std::to_string(acc));
        ranking.entries.emplace_back(classes[i], acc);
    }
    std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                     [](const auto& a, const auto& b) {
                         if (a.second != b.second) return a.second < b.second;
                         return a.first.index < b.first.index;
                     });
    return ranking;
}

SplitSpec make_incremental_split(const RankOrdering& ranking, int unseen_count,
                                 const IncrementalBounds& bounds) {
    const int k = static_cast<int>(ranking.entries.size());
    if (unseen_count < 1 || unseen_count >= k)
        throw ValidationError("incremental split index must be in [1, class count)");
    if (unseen_count < bounds.min_unseen || unseen_count > bounds.max_unseen)
        throw ValidationError("incremental split index " + std::to_string(unseen_count) +
                              " outside configured bounds [" + std::to_string(bounds.min_unseen) +
                              ", " + std::to_string(bounds.max_unseen) + "]");
    SplitSpec split;
    split.name = "S_I_" + std::to_string(unseen_count);
    for (int i = 0; i < k; ++i) {
        if (i < unseen_count)
            split.unseen.push_back(ranking.entries[i].first.index);
        else
            split.seen.push_back(ranking.entries[i].first.index);
    }
    std::sort(split.seen.begin(), split.seen.end());
    std::sort(split.unseen.begin(), split.unseen.end());
    return split;
}

RankOrdering load_rank_ordering(const std::filesystem::path& csv_path,
                                const std::vector<ClassLabel>& classes) {
    std::ifstream in(csv_path);
    if (!in.good()) throw ValidationError("cannot open rank ordering csv: " + csv_path.string());
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("rank ordering csv is empty");

    std::map<std::string, double> by_name;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const size_t comma = line.rfind(',');
        if (comma == std::string::npos)
            throw ValidationError("rank csv line " + std::to_string(line_no) + ": expected 'class,accuracy'");
        const std::string name = line.substr(0, comma);
        double acc = 0.0;
        try {
            acc = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw ValidationError("rank csv line " + std::to_string(line_no) + ": bad accuracy value");
        }
        if (!by_name.emplace(name, acc).second)
            throw ValidationError("rank csv: duplicate class '" + name + "'");
    }

    std::vector<double> acc(classes.size(), 0.0);
    for (const ClassLabel& c : classes) {
        auto it = by_name.find(c.name);
        if (it == by_name.end())
            throw ValidationError("rank csv: missing class '" + c.name + "'");
        acc[c.index] = it->second;
        by_name.erase(it);
    }
    if (!by_name.empty())
        throw ValidationError("rank csv: unknown class '" + by_name.begin()->first + "'");
    return make_rank_ordering(classes, acc);
}

void save_rank_ordering(const std::filesystem::path& csv_path, const RankOrdering& ranking) {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    if (!out.good()) throw ValidationError("cannot write rank csv: " + csv_path.string());
    out << "class,accuracy\n";
    char buf[64];
    for (const auto& [label, acc] : ranking.entries) {
        std::snprintf(buf, sizeof(buf), "%.17g", acc);
        out << label.name << "," << buf << "\n";
    }
}

std::vector<std::string> validate_split(const SplitSpec& split, const CorpusManifest& manifest) {
    std::vector<std::string> violations;
    std::set<int> seen(split.seen.begin(), split.seen.end());
    std::set<int> unseen(split.unseen.begin(), split.unseen.end());
    for (int u : unseen)
        if (seen.count(u))
            violations.push_back("class index " + std::to_string(u) + " is both seen and unseen");
    for (const ClassLabel& c : manifest.classes)
        if (!seen.count(c.index) && !unseen.count(c.index))
            violations.push_back("class '" + c.name + "' missing from the split");
    for (int idx : seen)
        if (idx < 0 || idx >= static_cast<int>(manifest.classes.size()))
            violations.push_back("seen class index " + std::to_string(idx) + " unknown to manifest");
    for (int idx : unseen)
        if (idx < 0 || idx >= static_cast<int>(manifest.classes.size()))
            violations.push_back("unseen class index " + std::to_string(idx) + " unknown to manifest");

    std::vector<int> counts(manifest.classes.size(), 0);
    for (const DocumentRecord& r : manifest.records) ++counts[r.label];
    for (const ClassLabel& c : manifest.classes)
        if (counts[c.index] == 0)
            violations.push_back("class '" + c.name + "' has no records");
    return violations;
}

void save_split(const std::filesystem::path& path, const SplitSpec& split,
                const std::vector<ClassLabel>& classes) {
    json j;
    j["name"] = split.name;
    j["seen"] = json::array();
    j["unseen"] = json::array();
    for (int idx : split.seen) j["seen"].push_back(classes.at(idx).name);
    for (int idx : split.unseen) j["unseen"].push_back(classes.at(idx).name);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.good()) throw ValidationError("cannot write split file: " + path.string());
    out << j.dump(2) << "\n";
}

SplitSpec load_split(const std::filesystem::path& path, const std::vector<ClassLabel>& classes) {
    std::ifstream in(path);
    if (!in.good()) throw ValidationError("cannot open split file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("split file " + path.string() + ": " + e.what());
    }
    const auto to_index = [&](const std::string& name) {
        for (const ClassLabel& c : classes)
            if (c.name == name) return c.index;
        throw ValidationError("split file references unknown class '" + name + "'");
    };
    SplitSpec split;
    try {
        split.name = j.at("name").get<std::string>();
        for (const auto& n : j.at("seen")) split.seen.push_back(to_index(n.get<std::string>()));
        for (const auto& n : j.at("unseen")) split.unseen.push_back(to_index(n.get<std::string>()));
    } catch (const json::exception& e) {
        throw ValidationError("split file " + path.string() + ": " + e.what());
    }
    std::sort(split.seen.begin(), split.seen.end());
    std::sort(split.unseen.begin(), split.unseen.end());
    return split;
}

} // namespace tricl
