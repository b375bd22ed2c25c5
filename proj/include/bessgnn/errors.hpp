#pragma once

#include <stdexcept>
#include <string>

namespace bessgnn {

/// Base class for every error raised by the library. The CLI maps the
/// subclasses onto process exit codes (see `exit_code_for`).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class BoundsError : public Error { using Error::Error; };
class ParameterError : public Error { using Error::Error; };
class TopologyError : public Error { using Error::Error; };
class PreconditionError : public Error { using Error::Error; };
class SizeError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class ConfigMismatchError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class GenerationError : public Error { using Error::Error; };
class UsageError : public Error { using Error::Error; };
class InvariantError : public Error { using Error::Error; };

// 0 ok, 1 usage error, 2 data/convergence error, 3 internal invariant breach
int exit_code_for(const std::exception& e) noexcept;

} // namespace bessgnn
