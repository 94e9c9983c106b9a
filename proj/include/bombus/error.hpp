#pragma once

#include <stdexcept>
#include <string>

namespace bombus {

/// Pipeline error carrying a stable machine-readable code (e.g. "duplicate_id",
/// "catalog_mismatch") next to a human-readable message. The CLI prints both
/// on one stderr line.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message);

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace bombus
