#pragma once

#include <stdexcept>
#include <string>

namespace mif {

// Base for all pipeline failures. Subclasses carry the failure kind in the
// type so call sites can catch selectively; the message carries context.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateHomography : Error { using Error::Error; };
struct PointAtInfinity : Error { using Error::Error; };
struct InsufficientMatches : Error { using Error::Error; };
struct EstimationFailed : Error { using Error::Error; };

struct NoKeypoints : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NonFiniteData : Error { using Error::Error; };

struct EmptyFeatureSet : Error { using Error::Error; };
struct DegenerateCluster : Error { using Error::Error; };

struct NonFiniteLoss : Error { using Error::Error; };
struct EmptyEvaluation : Error { using Error::Error; };

struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace mif
