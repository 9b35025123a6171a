#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nct {

/// Base class for every error raised by the library. `kind()` is the short
/// machine-readable tag the CLI prints on failure.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
  virtual std::string_view kind() const noexcept { return "error"; }
};

#define NCT_DEFINE_ERROR(Name, tag)                                    \
  class Name : public Error {                                          \
   public:                                                             \
    using Error::Error;                                                \
    std::string_view kind() const noexcept override { return tag; }    \
  };

NCT_DEFINE_ERROR(ConfigError, "config")
NCT_DEFINE_ERROR(IndexError, "index")
NCT_DEFINE_ERROR(UsageError, "usage")
NCT_DEFINE_ERROR(TrainingError, "training")
NCT_DEFINE_ERROR(LoadError, "load")
NCT_DEFINE_ERROR(IoError, "io")
NCT_DEFINE_ERROR(OracleInfeasible, "oracle-infeasible")
NCT_DEFINE_ERROR(PretrainFailed, "pretrain-failed")

#undef NCT_DEFINE_ERROR

}  // namespace nct
