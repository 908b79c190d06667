#pragma once

#include "laet/model.hpp"
#include "laet/probe.hpp"
#include "laet/task.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Single-file checkpoint:
//   8 bytes   magic "LAETCKPT"
//   8 bytes   manifest length, little-endian u64
//   manifest  UTF-8 JSON with sorted keys
//   data      little-endian f64 tensors in manifest order, no gaps
namespace laet {

inline constexpr std::string_view kCheckpointMagic = "LAETCKPT";

struct CheckpointMeta {
    std::vector<std::size_t> selected;
    Readout readout = Readout::LastToken;
    std::vector<std::string> classes; // empty for regression
};

struct Checkpoint {
    LayeredModel model;
    ProbeClassifier classifier;
    CheckpointMeta meta;
};

struct TensorEntry {
    std::string name;
    Shape shape;
    std::size_t offset = 0; // bytes from the start of the data section
    std::size_t count = 0;
};

std::string serialize_checkpoint(const LayeredModel& model, const ProbeClassifier& classifier,
                                 const CheckpointMeta& meta);

// Throws CorruptCheckpoint on bad magic, truncation, a malformed manifest or a
// manifest that disagrees with the data section.
Checkpoint parse_checkpoint(std::string_view bytes);

// Tensor table of a serialized checkpoint, read without building a model.
std::vector<TensorEntry> checkpoint_manifest(std::string_view bytes);

// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const LayeredModel& model,
                     const ProbeClassifier& classifier, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace laet
