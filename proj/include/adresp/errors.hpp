#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adresp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ADRESP_DECLARE_ERROR(Name)      \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

// model_core
ADRESP_DECLARE_ERROR(DomainError);
ADRESP_DECLARE_ERROR(InvalidModel);

// irls_solver
ADRESP_DECLARE_ERROR(DegenerateData);
ADRESP_DECLARE_ERROR(RankDeficient);

// dataset
ADRESP_DECLARE_ERROR(EmptyInput);
ADRESP_DECLARE_ERROR(NoPositives);
ADRESP_DECLARE_ERROR(NoNegatives);
ADRESP_DECLARE_ERROR(TooSmall);

// calibration
ADRESP_DECLARE_ERROR(DegenerateCalibration);

// feature_explorer
ADRESP_DECLARE_ERROR(AllCandidatesFailed);

// polytomous
ADRESP_DECLARE_ERROR(EmptyPool);

// scoring_engine
ADRESP_DECLARE_ERROR(EmptyBatch);
ADRESP_DECLARE_ERROR(ClockResolution);

// cli
ADRESP_DECLARE_ERROR(ConfigError);

#undef ADRESP_DECLARE_ERROR

/// Raised by ingestion when a record lacks a required field.
class SchemaMismatch : public Error {
 public:
  SchemaMismatch(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace adresp
