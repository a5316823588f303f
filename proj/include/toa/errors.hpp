#pragma once

#include <stdexcept>
#include <string>

namespace toa {

// Base for everything the library throws. kind() is the short tag used in
// reports ("ContainmentError", ...).
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// numerical / convergence failures -> exit code 2
class NumericalError : public Error {
    using Error::Error;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("IoError", what) {}
};

#define TOA_NUMERICAL_ERROR(Name)                                              \
    class Name : public NumericalError {                                       \
    public:                                                                    \
        explicit Name(const std::string& what) : NumericalError(#Name, what) {} \
    };

TOA_NUMERICAL_ERROR(ContainmentError)
TOA_NUMERICAL_ERROR(StepSizeError)
TOA_NUMERICAL_ERROR(SupportError)
TOA_NUMERICAL_ERROR(QuadratureError)
TOA_NUMERICAL_ERROR(DomainError)
TOA_NUMERICAL_ERROR(LeakError)
TOA_NUMERICAL_ERROR(ZeroFlux)
TOA_NUMERICAL_ERROR(ZeroDensity)
TOA_NUMERICAL_ERROR(NotFound)
TOA_NUMERICAL_ERROR(NotNormalizable)
TOA_NUMERICAL_ERROR(RejectionStall)
TOA_NUMERICAL_ERROR(EmptyAbsorption)
TOA_NUMERICAL_ERROR(StatisticsError)
TOA_NUMERICAL_ERROR(RealityError)
TOA_NUMERICAL_ERROR(GridMismatch)
TOA_NUMERICAL_ERROR(HermiticityError)
TOA_NUMERICAL_ERROR(EmptyDomain)
TOA_NUMERICAL_ERROR(UnsupportedError)

#undef TOA_NUMERICAL_ERROR

} // namespace toa
