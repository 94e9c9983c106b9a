#include "bombus/error.hpp"

#include <utility>

namespace bombus {

Error::Error(std::string code, const std::string& message)
    : std::runtime_error(message), code_(std::move(code)) {}

}  // namespace bombus
