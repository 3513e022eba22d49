#pragma once

#include <stdexcept>
#include <string>

namespace fgddf {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two factors disagree on the dimension of a shared variable, or matrix
/// shapes do not line up with a scope.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A block that must be inverted (Schur complement, conditional block) is
/// singular or has condition number above kSingularConditionLimit.
class SingularBlock : public Error {
public:
    using Error::Error;
};

/// Input to a moment/canonical conversion is not symmetric positive definite.
class NotADistribution : public Error {
public:
    using Error::Error;
};

/// The joint of a factor graph has no proper (SPD) posterior.
class ImproperPosterior : public Error {
public:
    using Error::Error;
};

/// Structural misuse of a factor graph: duplicate or unknown variable, unknown factor id.
class GraphError : public Error {
public:
    using Error::Error;
};

/// A fusion message violates the link contract (scope, addressing, duplicate delivery).
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Marginalizing onto the common set failed; the message for this link is skipped.
class FusionDeferred : public Error {
public:
    using Error::Error;
};

class TopologyError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace fgddf
