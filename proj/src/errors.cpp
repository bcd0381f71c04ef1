#include "knet/errors.hpp"

namespace knet {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::EmptyInput: return "empty-input error";
    case ErrorKind::Unsupported: return "unsupported error";
    case ErrorKind::DegenerateBatch: return "degenerate-batch error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "io error";
    }
    return "error";
}

}  // namespace knet
