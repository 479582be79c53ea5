#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tn {

/// Base of every error raised by the library. `what()` carries a readable
/// diagnostic; the concrete type identifies the failure.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A CSV row that cannot be turned into a valid tick.
class MalformedRow : public Error {
public:
    MalformedRow(std::size_t line, const std::string& why)
        : Error("malformed row at line " + std::to_string(line) + ": " + why), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NonMonotonicTimestamp : public Error {
public:
    explicit NonMonotonicTimestamp(std::size_t line)
        : Error("timestamp decreases at line " + std::to_string(line)), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyInput : public Error {
public:
    EmptyInput() : Error("empty input") {}
};

class SeriesTooShort : public Error {
public:
    SeriesTooShort(std::size_t have, std::size_t need)
        : Error("series too short: " + std::to_string(have) + " < " + std::to_string(need)) {}
};

class InvalidSchedule : public Error {
public:
    using Error::Error;
};

class WindowTooSmall : public Error {
public:
    WindowTooSmall(std::size_t window, int order)
        : Error("window " + std::to_string(window) + " too small for order " + std::to_string(order)) {}
};

class DegenerateSystem : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    IndexOutOfRange(std::size_t index, std::size_t size)
        : Error("index " + std::to_string(index) + " out of range [0, " + std::to_string(size) + ")") {}
};

class EmptyView : public Error {
public:
    EmptyView() : Error("empty view") {}
};

class SpanTooShort : public Error {
public:
    explicit SpanTooShort(std::size_t span)
        : Error("figure span " + std::to_string(span) + " is shorter than 3 columns") {}
};

class InsufficientHistory : public Error {
public:
    InsufficientHistory(const std::string& instrument, const std::string& detail)
        : Error("insufficient history for " + instrument + ": " + detail), instrument_(instrument) {}
    [[nodiscard]] const std::string& instrument() const noexcept { return instrument_; }

private:
    std::string instrument_;
};

class EmptyFigureSet : public Error {
public:
    explicit EmptyFigureSet(const char* side) : Error(std::string("empty figure set on side ") + side) {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace tn
