#pragma once

#include <stdexcept>
#include <string>

namespace bbx {

// Shape of an argument does not match what the operation requires.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A parameter is outside its documented range.
struct ParamError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A serialized artifact (weight file, PPM, CIFAR record, config) is malformed.
// `offset` is the byte offset at which parsing failed, or -1 when unknown.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what, long long offset = -1)
      : std::runtime_error(offset >= 0 ? what + " (byte offset " + std::to_string(offset) + ")"
                                       : what),
        offset(offset) {}
  long long offset;
};

// An operation's stated precondition does not hold.
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The (B+1)-th query against a budgeted oracle.
struct QueryBudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A probability query against a label-only oracle.
struct ProbabilityAccessError : std::logic_error {
  using std::logic_error::logic_error;
};

// Attack initialization could not find any adversarial starting point.
struct InitFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyDatasetError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Evaluation-set selection could not fill some class.
struct SelectionError : std::runtime_error {
  explicit SelectionError(const std::string& what, int class_index)
      : std::runtime_error(what), class_index(class_index) {}
  int class_index;
};

// The external-oracle child process violated the line protocol.
struct OracleProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bbx
