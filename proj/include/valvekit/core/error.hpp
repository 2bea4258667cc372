#pragma once

#include <stdexcept>
#include <string>

namespace valvekit {

/// Base exception for all toolkit failures. Messages are meant to be shown
/// to a user as-is.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class GeometryMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace valvekit
