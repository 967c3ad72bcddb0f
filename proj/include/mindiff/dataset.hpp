// In-memory dataset model for multi-task, multi-group classification.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mindiff/features.hpp"

namespace mindiff {

enum class Membership : std::uint8_t { NonMember = 0, Member = 1, Unknown = 2 };

struct Example {
    SparseFeatures features;
    std::vector<std::uint8_t> labels;   // one 0/1 label per task
    std::vector<Membership> groups;     // one membership flag per group
};

struct Dataset {
    std::vector<Example> examples;
    std::size_t num_tasks = 0;
    std::size_t num_groups = 0;
    std::vector<std::string> task_names;
    std::vector<std::string> group_names;
    std::vector<std::string> texts;     // raw text per example when available
    std::size_t skipped_rows = 0;       // unparsable CSV rows, counted not fatal

    std::size_t size() const { return examples.size(); }
};

// The system-level label: the logical OR of the task labels. Derived, never
// stored.
inline bool overall_label(const Example& ex) {
    for (auto y : ex.labels)
        if (y) return true;
    return false;
}

inline bool all_labels_negative(const Example& ex) { return !overall_label(ex); }

}  // namespace mindiff
