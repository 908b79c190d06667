#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace laet {

// Byte-level tokenizer: ids 0..255 are raw bytes, followed by special tokens.
class Tokenizer {
public:
    static constexpr std::size_t kByteCount = 256;
    static constexpr std::size_t kPadId = 256;
    static constexpr std::size_t kVocabSize = kByteCount + 1;

    // Full sequence, no truncation. Empty text maps to a single padding token.
    [[nodiscard]] std::vector<std::size_t> encode(std::string_view text) const;

    // Keeps the last `max_context` tokens (the suffix carries the answer cue).
    [[nodiscard]] std::vector<std::size_t> tokenize(std::string_view text, std::size_t max_context) const;

    // Inverse of encode; padding decodes to nothing.
    [[nodiscard]] std::string decode(std::span<const std::size_t> ids) const;

    // Unit string -> id: single-byte strings plus "<pad>".
    [[nodiscard]] std::map<std::string, std::size_t> vocabulary() const;

    [[nodiscard]] static constexpr std::size_t vocab_size() noexcept { return kVocabSize; }
};

} // namespace laet
