#pragma once

#include <stdexcept>
#include <string>

namespace handfuse {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define HANDFUSE_ERROR(Name)            \
  struct Name : Error {                 \
    using Error::Error;                 \
  }

HANDFUSE_ERROR(WrongLength);
HANDFUSE_ERROR(EmptyInput);
HANDFUSE_ERROR(NotFitted);
HANDFUSE_ERROR(EmptyImage);
HANDFUSE_ERROR(EmptySequence);
HANDFUSE_ERROR(MalformedCsv);
HANDFUSE_ERROR(MissingImage);
HANDFUSE_ERROR(UnknownLayout);
HANDFUSE_ERROR(TooFewSamples);
HANDFUSE_ERROR(BadFactorization);
HANDFUSE_ERROR(ShapeMismatch);
HANDFUSE_ERROR(StaleCache);
HANDFUSE_ERROR(NonFiniteLoss);
HANDFUSE_ERROR(IndexOutOfRange);
HANDFUSE_ERROR(LengthMismatch);
HANDFUSE_ERROR(EmptyEvaluation);
HANDFUSE_ERROR(LabelTableMismatch);
HANDFUSE_ERROR(ConfigError);
HANDFUSE_ERROR(IoError);

#undef HANDFUSE_ERROR

}  // namespace handfuse
