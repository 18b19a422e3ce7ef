#pragma once

#include <stdexcept>
#include <string>

namespace securent {

// Malformed input text (GraphML, CSV, plan or config files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input parses but violates a structural invariant (disconnected graph, ...).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fake topology construction could not find an admissible rewiring.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Boolean path states that no link assignment can explain.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace securent
