#pragma once

#include <stdexcept>
#include <string>

namespace gazeaeg {

// Root of every error raised by the library. Subclasses name the failure
// category so callers (and tests) can dispatch on it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GAZEAEG_ERROR_KIND(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

GAZEAEG_ERROR_KIND(FormatError);
GAZEAEG_ERROR_KIND(ParseError);
GAZEAEG_ERROR_KIND(ValidationError);
GAZEAEG_ERROR_KIND(DomainError);
GAZEAEG_ERROR_KIND(NumericError);
GAZEAEG_ERROR_KIND(ParameterError);
GAZEAEG_ERROR_KIND(IoError);
GAZEAEG_ERROR_KIND(AlignmentError);
GAZEAEG_ERROR_KIND(EncodingError);
GAZEAEG_ERROR_KIND(ContractError);
GAZEAEG_ERROR_KIND(ConfigError);
GAZEAEG_ERROR_KIND(TrainingError);
GAZEAEG_ERROR_KIND(InferenceError);
GAZEAEG_ERROR_KIND(PoolingError);
GAZEAEG_ERROR_KIND(ComparisonError);

#undef GAZEAEG_ERROR_KIND

}  // namespace gazeaeg
