#pragma once

#include <stdexcept>
#include <string>

namespace iplan {

// Base of every error raised by the pipeline. Subclasses name the failure
// category so callers (CLI, HTTP layer) can map them to exit codes / statuses.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)), detail_(what) {}
    const std::string& kind() const noexcept { return kind_; }
    // The message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string kind_;
    std::string detail_;
};

#define IPLAN_DEFINE_ERROR(Name)                                               \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name, what) {}         \
    };

IPLAN_DEFINE_ERROR(CountOverflow)
IPLAN_DEFINE_ERROR(ShapeError)
IPLAN_DEFINE_ERROR(DomainError)
IPLAN_DEFINE_ERROR(RegistryError)
IPLAN_DEFINE_ERROR(DataError)
IPLAN_DEFINE_ERROR(ParseError)
IPLAN_DEFINE_ERROR(NoFreeSpace)
IPLAN_DEFINE_ERROR(SequenceError)
IPLAN_DEFINE_ERROR(NumericsError)
IPLAN_DEFINE_ERROR(VariantError)
IPLAN_DEFINE_ERROR(EditError)
IPLAN_DEFINE_ERROR(ValidationError)
IPLAN_DEFINE_ERROR(NotFound)

#undef IPLAN_DEFINE_ERROR

} // namespace iplan
