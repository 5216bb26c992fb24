#pragma once

#include <stdexcept>
#include <string>

namespace bglstm {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand dimensions disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Argument outside the documented domain (non-finite values, empty input, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

// A configuration object violates its invariants.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Data too degenerate to continue (zero variance, all-zero errors, ...).
class DegenerateData : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Raised by the binary readers (model files, FLO, PGM).
class FormatError : public Error {
public:
    enum class Code { BadMagic = 1, BadVersion = 2, BadChecksum = 3, Malformed = 4 };

    FormatError(Code code, const std::string& what) : Error(what), code_(code) {}

    Code code() const noexcept { return code_; }

private:
    Code code_;
};

}  // namespace bglstm
