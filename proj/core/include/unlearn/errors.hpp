#pragma once

#include <stdexcept>
#include <string>

namespace unlearn {

enum class Errc {
  NonFinite,
  ConvergenceFailure,
  Overflow,
  InvalidFloor,
  DimensionMismatch,
  SingularCovariance,
  SingularMatrix,
  InvalidSpec,
  EmptyForget,
  EmptyRetain,
  NoSuchClass,
  ParseError,
  LabelOutOfRange,
  UnsupportedModel,
  Diverged,
  NotAtMinimum,
  NoiselessMethod,
  DegenerateFit,
  HidingRequiresWholeClass,
  NotReached,
  InvalidConfig,
  IoError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace unlearn
