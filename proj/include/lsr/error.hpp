#pragma once

#include <stdexcept>
#include <string>

namespace lsr {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define LSR_DEFINE_ERROR(Name)                          \
    class Name : public Error {                         \
    public:                                             \
        explicit Name(const std::string& what)          \
            : Error(std::string(#Name ": ") + what) {}  \
    }

LSR_DEFINE_ERROR(InvalidConfig);
LSR_DEFINE_ERROR(InvalidShape);
LSR_DEFINE_ERROR(DegenerateShape);
LSR_DEFINE_ERROR(EmptyInput);
LSR_DEFINE_ERROR(NoSurvivors);
LSR_DEFINE_ERROR(SingularSystem);
LSR_DEFINE_ERROR(InsufficientClass);
LSR_DEFINE_ERROR(DimensionMismatch);
LSR_DEFINE_ERROR(DegenerateConfiguration);
LSR_DEFINE_ERROR(NoStableCombination);
LSR_DEFINE_ERROR(EmptySeed);
LSR_DEFINE_ERROR(MalformedFile);
LSR_DEFINE_ERROR(IoError);
LSR_DEFINE_ERROR(InvalidRatios);
LSR_DEFINE_ERROR(ZeroPupilDistance);
LSR_DEFINE_ERROR(ConstantInput);

#undef LSR_DEFINE_ERROR

} // namespace lsr
