#pragma once

#include <stdexcept>
#include <string>

namespace sampalloc {

// Sample has zero probability under the current belief and error model.
class ZeroLikelihood : public std::runtime_error {
 public:
  explicit ZeroLikelihood(const std::string& what) : std::runtime_error(what) {}
};

class OutOfRange : public std::out_of_range {
 public:
  explicit OutOfRange(const std::string& what) : std::out_of_range(what) {}
};

// Uniform-phase length is not a multiple of m*k.
class NotMultiple : public std::invalid_argument {
 public:
  explicit NotMultiple(const std::string& what) : std::invalid_argument(what) {}
};

class UnknownSet : public std::invalid_argument {
 public:
  explicit UnknownSet(const std::string& what) : std::invalid_argument(what) {}
};

class InsufficientData : public std::invalid_argument {
 public:
  explicit InsufficientData(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace sampalloc
