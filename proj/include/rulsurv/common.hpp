#pragma once

#include <stdexcept>
#include <string>

namespace rulsurv {

/// Library-wide exception type. Thrown on precondition violations,
/// malformed inputs and unreadable files; messages name the offender.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw error(msg);
}

}  // namespace rulsurv
