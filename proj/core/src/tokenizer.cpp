#include "laet/tokenizer.hpp"

#include "laet/error.hpp"

namespace laet {

std::vector<std::size_t> Tokenizer::encode(std::string_view text) const {
    if (text.empty()) {
        return {kPadId};
    }
    std::vector<std::size_t> ids;
    ids.reserve(text.size());
    for (char c : text) {
        ids.push_back(static_cast<unsigned char>(c));
    }
    return ids;
}

std::vector<std::size_t> Tokenizer::tokenize(std::string_view text, std::size_t max_context) const {
    if (max_context == 0) {
        throw InvalidArgument("max_context must be positive");
    }
    if (text.size() > max_context) {
        text.remove_prefix(text.size() - max_context);
    }
    return encode(text);
}

std::string Tokenizer::decode(std::span<const std::size_t> ids) const {
    std::string out;
    out.reserve(ids.size());
    for (std::size_t id : ids) {
        if (id < kByteCount) {
            out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
        } else if (id != kPadId) {
            throw InvalidArgument("token id " + std::to_string(id) + " outside vocabulary");
        }
    }
    return out;
}

std::map<std::string, std::size_t> Tokenizer::vocabulary() const {
    std::map<std::string, std::size_t> vocab;
    for (std::size_t b = 0; b < kByteCount; ++b) {
        vocab.emplace(std::string(1, static_cast<char>(static_cast<unsigned char>(b))), b);
    }
    vocab.emplace("<pad>", kPadId);
    return vocab;
}

} // namespace laet
