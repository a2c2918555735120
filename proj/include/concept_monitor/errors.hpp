#pragma once

#include <stdexcept>
#include <string>

namespace concept_monitor {

/// Bad or inconsistent input: files, manifests, flags, arguments. CLI exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure while computing on valid input (e.g. non-finite loss). CLI exit code 1.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FormatErrorKind {
    Io,
    BadMagic,
    UnsupportedVersion,
    UnsupportedDtype,
    BadReserved,
    Truncated,
    TrailingBytes,
    NonFinite,
};

/// MatrixFile decoding failure; `offset()` is the byte offset of the offending field.
class FormatError : public InputError {
public:
    FormatError(FormatErrorKind kind, std::size_t offset, const std::string& what)
        : InputError(what), kind_(kind), offset_(offset) {}

    [[nodiscard]] FormatErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

private:
    FormatErrorKind kind_;
    std::size_t offset_;
};

}  // namespace concept_monitor
