#pragma once

#include <stdexcept>
#include <string>

namespace labelbudget {

/// Base for every failure caused by bad input data or violated preconditions.
/// The CLI maps these to exit code 1.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFoundError : public DomainError {
public:
    using DomainError::DomainError;
};

/// A stored file does not match its own header.
class CorruptionError : public DomainError {
public:
    using DomainError::DomainError;
};

/// An external trainer broke the wire protocol, crashed, or timed out.
class ProtocolError : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace labelbudget
