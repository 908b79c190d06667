#include "laet/synth.hpp"

#include "laet/error.hpp"
#include "laet/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace laet {

namespace {

constexpr std::array<std::string_view, 16> kFillerWords = {
    "the", "a", "of", "and", "to", "in", "it", "is", "was", "for", "on", "with", "as", "at", "by", "this",
};

constexpr std::string_view kKeywordInstruction = "Find the tag. ";
constexpr std::string_view kSuffixInstruction = "Last letter? ";

constexpr std::size_t kKeywordMinWords = 3;
constexpr std::size_t kKeywordMaxWords = 6;
constexpr std::size_t kSuffixMinFiller = 20;
constexpr std::size_t kSuffixSpan = 30;

std::string keyword_text(std::size_t cls, Rng& rng) {
    const std::size_t words = kKeywordMinWords + rng.below(kKeywordMaxWords - kKeywordMinWords + 1);
    const std::size_t slot = rng.below(words + 1);
    std::string text;
    for (std::size_t w = 0; w <= words; ++w) {
        if (!text.empty()) {
            text += ' ';
        }
        if (w == slot) {
            text += synth_keyword(cls);
        } else {
            text += kFillerWords[rng.below(kFillerWords.size())];
        }
    }
    return text;
}

// Random lowercase filler whose length is congruent to the class modulo k, so
// the label is carried by where the text ends.
std::string suffix_text(std::size_t cls, std::size_t classes, Rng& rng) {
    const std::size_t span = std::max<std::size_t>(kSuffixSpan, 2 * classes);
    const std::size_t first = kSuffixMinFiller + (cls + classes - kSuffixMinFiller % classes) % classes;
    const std::size_t choices = (kSuffixMinFiller + span - first + classes - 1) / classes;
    const std::size_t len = first + classes * rng.below(choices);
    std::string text;
    for (std::size_t i = 0; i < len; ++i) {
        text += static_cast<char>('a' + rng.below(26));
    }
    return text;
}

} // namespace

std::string_view to_string(SynthTask t) { return t == SynthTask::Keyword ? "keyword" : "suffix"; }

SynthTask parse_synth_task(std::string_view name) {
    if (name == "keyword") {
        return SynthTask::Keyword;
    }
    if (name == "suffix") {
        return SynthTask::Suffix;
    }
    throw InvalidArgument("unknown synthetic task '" + std::string(name) + "' (expected keyword or suffix)");
}

void SynthSpec::validate() const {
    if (classes < 2 || classes > 26) {
        throw InvalidArgument("synthetic tasks support 2 to 26 classes");
    }
    if (size < 10 * classes) {
        throw InvalidArgument("synthetic size must be at least 10 examples per class");
    }
    if (!(noise >= 0.0 && noise < 1.0)) {
        throw InvalidArgument("noise must lie in [0, 1)");
    }
}

std::string synth_class_name(std::size_t c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "c%02zu", c);
    return buf;
}

std::string synth_keyword(std::size_t c) {
    std::string kw;
    for (std::size_t i = 0; i < 3; ++i) {
        kw += static_cast<char>('A' + (3 * c + i) % 26);
    }
    return kw;
}

std::vector<DatasetRecord> synth_generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<std::size_t> classes(spec.size);
    for (std::size_t i = 0; i < spec.size; ++i) {
        classes[i] = i % spec.classes;
    }
    rng.shuffle(std::span(classes));

    std::vector<DatasetRecord> records;
    records.reserve(spec.size);
    for (std::size_t cls : classes) {
        DatasetRecord r;
        if (spec.task == SynthTask::Keyword) {
            r.instruction = std::string(kKeywordInstruction);
            r.text = keyword_text(cls, rng);
        } else {
            r.instruction = std::string(kSuffixInstruction);
            r.text = suffix_text(cls, spec.classes, rng);
        }
        r.answer = synth_class_name(cls);
        records.push_back(std::move(r));
    }

    const auto flips = static_cast<std::size_t>(std::llround(spec.noise * static_cast<double>(spec.size)));
    std::vector<std::size_t> order(spec.size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < flips; ++i) {
        const std::size_t idx = order[i];
        const std::size_t cls = classes[idx];
        const std::size_t other = (cls + 1 + rng.below(spec.classes - 1)) % spec.classes;
        records[idx].answer = synth_class_name(other);
    }
    return records;
}

} // namespace laet
