#pragma once

#include <string>

namespace gwsearch::genclient {

// Structured failure taxonomy shared by the evaluator and the correction
// loop: parse error, runtime error, no-trigger, timeout.
struct FailureReport {
  enum class Kind { Parse, Runtime, NoTrigger, Timeout };
  Kind kind = Kind::Runtime;
  std::string message;

  std::string to_text() const {
    const char* label = "runtime error";
    switch (kind) {
      case Kind::Parse: label = "parse error"; break;
      case Kind::Runtime: label = "runtime error"; break;
      case Kind::NoTrigger: label = "no signals found"; break;
      case Kind::Timeout: label = "timeout"; break;
    }
    return std::string(label) + ": " + message;
  }
};

}  // namespace gwsearch::genclient
