#pragma once

#include <stdexcept>
#include <string>

namespace knet {

enum class ErrorKind {
    Shape,
    Range,
    State,
    Parse,
    Validation,
    EmptyInput,
    Unsupported,
    DegenerateBatch,
    Numeric,
    Config,
    Io,
};

const char* to_string(ErrorKind kind);

/// Base of every error raised by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define KNET_DEFINE_ERROR(Name, Kind)                                               \
    class Name : public Error {                                                     \
    public:                                                                         \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}    \
    };

KNET_DEFINE_ERROR(ShapeError, Shape)
KNET_DEFINE_ERROR(RangeError, Range)
KNET_DEFINE_ERROR(StateError, State)
KNET_DEFINE_ERROR(ParseError, Parse)
KNET_DEFINE_ERROR(ValidationError, Validation)
KNET_DEFINE_ERROR(EmptyInputError, EmptyInput)
KNET_DEFINE_ERROR(UnsupportedError, Unsupported)
KNET_DEFINE_ERROR(DegenerateBatchError, DegenerateBatch)
KNET_DEFINE_ERROR(NumericError, Numeric)
KNET_DEFINE_ERROR(ConfigError, Config)
KNET_DEFINE_ERROR(IoError, Io)

#undef KNET_DEFINE_ERROR

}  // namespace knet
