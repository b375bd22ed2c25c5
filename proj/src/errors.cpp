#include "bessgnn/errors.hpp"

namespace bessgnn {

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const UsageError*>(&e)) return 1;
    if (dynamic_cast<const InvariantError*>(&e)) return 3;
    if (dynamic_cast<const Error*>(&e)) return 2;
    return 3;
}

} // namespace bessgnn
