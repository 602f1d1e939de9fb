#pragma once

#include <stdexcept>
#include <string>

namespace icdh {

/// Base class of every error thrown by the library. Each subclass maps to one
/// failure category so callers (and the HTTP layer) can branch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

/// Binary file with wrong magic, version or checksum.
class FormatError : public Error {
public:
    using Error::Error;
};

class ProviderUnavailable : public Error {
public:
    using Error::Error;
};

class SegmentationFailed : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

} // namespace icdh
