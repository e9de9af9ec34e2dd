#pragma once

#include <stdexcept>
#include <string>

namespace aeromatch {

/// Base class for all library errors. The CLI maps subclasses to exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularTransform : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct NotScalar : Error {
  using Error::Error;
};
// A forward op produced a non-finite value; the message names the op.
struct NumericError : Error {
  using Error::Error;
};
struct DivergedLoss : NumericError {
  using NumericError::NumericError;
};
struct IoError : Error {
  using Error::Error;
};
struct FormatViolation : Error {
  using Error::Error;
};
struct MissingKeypoints : Error {
  using Error::Error;
};
struct InsufficientTexture : Error {
  using Error::Error;
};
struct PaddingLeak : Error {
  using Error::Error;
};

}  // namespace aeromatch
