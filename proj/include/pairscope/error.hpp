#ifndef PAIRSCOPE_ERROR_HPP
#define PAIRSCOPE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace pairscope {

/// Coarse failure classes. The CLI prints the category name on its error line
/// so scripts can branch on it.
enum class ErrorCategory {
    range,
    domain,
    config,
    io,
    schema,
    shape,
    precondition,
    injection,
    degenerate,
    out_of_beam,
};

inline std::string_view category_name(ErrorCategory c) noexcept
{
    switch (c) {
    case ErrorCategory::range: return "range";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::precondition: return "precondition";
    case ErrorCategory::injection: return "injection";
    case ErrorCategory::degenerate: return "degenerate";
    case ErrorCategory::out_of_beam: return "out_of_beam";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what)
{
    throw Error(c, what);
}

} // namespace pairscope

#endif
