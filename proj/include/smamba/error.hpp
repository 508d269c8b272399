#pragma once

#include <stdexcept>
#include <string>

namespace smamba {

// Every library failure carries a stable kind tag; the CLI prints it as
// "ERR:<kind>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SMAMBA_DEFINE_ERROR(Name, tag) \
  class Name : public Error {          \
   public:                             \
    explicit Name(const std::string& what) : Error(tag, what) {} \
  };

SMAMBA_DEFINE_ERROR(DimensionError, "dimension")
SMAMBA_DEFINE_ERROR(NumericError, "numeric")
SMAMBA_DEFINE_ERROR(ConfigError, "config")
SMAMBA_DEFINE_ERROR(IndexError, "index")
SMAMBA_DEFINE_ERROR(ContractError, "contract")
SMAMBA_DEFINE_ERROR(FormatError, "format")
SMAMBA_DEFINE_ERROR(SplitError, "split")
SMAMBA_DEFINE_ERROR(IoError, "io")

#undef SMAMBA_DEFINE_ERROR

}  // namespace smamba
