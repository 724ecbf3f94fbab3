#pragma once

#include <stdexcept>
#include <string>

namespace mmu {

/// Error thrown on contract violations, malformed inputs and failed stages.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

}  // namespace mmu
