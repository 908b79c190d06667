#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace laet {

enum class TaskKind { Classification, Regression };

std::string_view to_string(TaskKind kind);

// A rendered prompt with its encoded answer.
struct LabeledExample {
    std::string prompt;
    std::size_t label = 0;  // classification
    double target = 0.0;    // regression
};

struct LabeledSet {
    TaskKind task = TaskKind::Classification;
    std::size_t num_classes = 0; // 0 for regression
    std::vector<LabeledExample> examples;

    [[nodiscard]] std::size_t size() const noexcept { return examples.size(); }
    [[nodiscard]] bool empty() const noexcept { return examples.empty(); }
    // Output width of a head for this task: k logits or one scalar.
    [[nodiscard]] std::size_t output_dim() const noexcept {
        return task == TaskKind::Classification ? num_classes : 1;
    }
};

} // namespace laet
