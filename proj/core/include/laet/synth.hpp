#pragma once

#include "laet/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace laet {

// keyword: the class is named by an uppercase keyword placed anywhere among
// lowercase filler words. suffix: random lowercase text whose length modulo k
// is the class, so only the position of the final token carries the label.
enum class SynthTask { Keyword, Suffix };

std::string_view to_string(SynthTask t);
SynthTask parse_synth_task(std::string_view name); // keyword | suffix

struct SynthSpec {
    SynthTask task = SynthTask::Keyword;
    std::size_t size = 2000;
    std::size_t classes = 3;
    double noise = 0.0; // fraction of labels flipped to a different class
    std::uint64_t seed = 0;

    // size >= 10 * classes, 2 <= classes <= 26, noise in [0, 1).
    void validate() const;
};

// "c00", "c01", ...
std::string synth_class_name(std::size_t c);

// Three-letter uppercase keyword of class c in the keyword task.
std::string synth_keyword(std::size_t c);

// Balanced classes in shuffled order; exactly round(noise * size) labels flipped.
std::vector<DatasetRecord> synth_generate(const SynthSpec& spec);

} // namespace laet
