#pragma once

#include <stdexcept>
#include <string>

namespace mrag {

// All recoverable failures surface as Error; the message carries enough
// context (file, line number, offending id, stage) to act on.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mrag
