#pragma once

#include "laet/task.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace laet {

// One instruction-format example as stored in JSONL.
struct DatasetRecord {
    std::string instruction;
    std::string text;
    std::string answer;

    bool operator==(const DatasetRecord&) const = default;
};

enum class TaskMode { Auto, Classification, Regression };

TaskMode parse_task_mode(std::string_view name); // auto | classification | regression

// Maps answers to class indices (sorted class names) or to scalar targets.
class LabelCodec {
public:
    // Class names are sorted lexicographically; they must be unique and at least two.
    static LabelCodec classification(std::vector<std::string> classes);
    static LabelCodec regression();

    // Auto mode picks regression iff every answer parses as a decimal number.
    static LabelCodec infer(std::span<const DatasetRecord> records, TaskMode mode = TaskMode::Auto);

    [[nodiscard]] TaskKind task() const noexcept { return task_; }
    [[nodiscard]] std::size_t num_classes() const noexcept { return classes_.size(); }
    [[nodiscard]] const std::vector<std::string>& classes() const noexcept { return classes_; }

    [[nodiscard]] std::size_t encode(std::string_view answer) const;
    [[nodiscard]] double encode_target(std::string_view answer) const;
    [[nodiscard]] const std::string& decode(std::size_t label) const;

private:
    TaskKind task_ = TaskKind::Classification;
    std::vector<std::string> classes_;
};

// Full-string decimal parse; nullopt-like false on anything else.
bool parse_decimal(std::string_view text, double& out);

struct LoadedDataset {
    std::vector<DatasetRecord> records;
    LabelCodec codec;
};

// One JSON object per line with keys instruction, text, answer (string or
// number). Unknown keys are ignored, blank lines skipped. Malformed lines raise
// ParseError carrying the 1-based line number.
std::vector<DatasetRecord> read_jsonl(std::istream& in);
LoadedDataset load_jsonl(const std::filesystem::path& path, TaskMode mode = TaskMode::Auto);

void write_jsonl(std::ostream& out, std::span<const DatasetRecord> records);
void write_jsonl(const std::filesystem::path& path, std::span<const DatasetRecord> records);

// "{instruction}{text} Answer:"
std::string format_prompt(const DatasetRecord& record);

LabeledSet to_labeled_set(std::span<const DatasetRecord> records, const LabelCodec& codec);

struct SplitFractions {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

struct DatasetSplit {
    std::vector<DatasetRecord> train;
    std::vector<DatasetRecord> validation;
    std::vector<DatasetRecord> test;
};

// Seeded shuffle then contiguous slicing; stratified by label for classification codecs.
DatasetSplit split(std::span<const DatasetRecord> records, const SplitFractions& fractions, std::uint64_t seed,
                   const LabelCodec& codec);

// Permutation of 0..n-1 that interleaves strata proportionally, so that every
// contiguous slice holds each stratum within one item of its global share.
// Items within a stratum are shuffled with `seed`.
std::vector<std::size_t> stratified_order(std::span<const std::size_t> strata, std::uint64_t seed);

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed);

} // namespace laet
