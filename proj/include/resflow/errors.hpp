#pragma once

#include <stdexcept>
#include <string>

namespace resflow {

// Base class for every error the library throws. The CLI maps UsageError
// and ConfigError to exit code 2, everything else to 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct RangeError : Error { using Error::Error; };
struct DateError : Error { using Error::Error; };
struct WindowError : Error { using Error::Error; };
struct SplitError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct MetricError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace resflow
