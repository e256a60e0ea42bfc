#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace revar {

enum class ErrorKind {
    Parse,
    Validation,
    Domain,
    InsufficientData,
    Config,
    Alignment,
    DegenerateHistory,
    FilterDivergence,
    Layout,
    AdaptationFailure,
    ForecastQuality,
    ContractViolation,
    Io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Config: return "config";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::DegenerateHistory: return "degenerate-history";
    case ErrorKind::FilterDivergence: return "filter-divergence";
    case ErrorKind::Layout: return "layout";
    case ErrorKind::AdaptationFailure: return "adaptation-failure";
    case ErrorKind::ForecastQuality: return "forecast-quality";
    case ErrorKind::ContractViolation: return "contract-violation";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

/// Every library failure carries a machine-readable kind next to the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Parse failure located at a 1-based line of an input file.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised by the variance filter when log h_t leaves the finite range.
class FilterDivergence : public Error {
public:
    explicit FilterDivergence(std::size_t t)
        : Error(ErrorKind::FilterDivergence, "non-finite conditional variance at t=" + std::to_string(t)),
          t_(t) {}

    std::size_t time_index() const noexcept { return t_; }

private:
    std::size_t t_;
};

}  // namespace revar
