#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace laet {

// Bad caller input: out-of-range indices, malformed shapes of user data,
// unknown enum names and the like.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A precondition the library itself guarantees was violated (programming error).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss. Carries the position where it happened.
class NumericDivergence : public NumericError {
public:
    NumericDivergence(std::size_t epoch, std::size_t batch, const std::string& what)
        : NumericError(what + " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ")"),
          epoch_(epoch),
          batch_(batch) {}

    [[nodiscard]] std::size_t epoch() const noexcept { return epoch_; }
    [[nodiscard]] std::size_t batch() const noexcept { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class CorruptCheckpoint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Wraps any failure inside the pipeline with the name of the stage that raised it.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace laet
