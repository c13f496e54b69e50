#pragma once

#include <stdexcept>
#include <string>

namespace svos {

// Bad inputs (paths, shapes out of contract, malformed configs). The CLI maps
// these to exit code 2; everything else derived from std::exception exits 1.
struct validation_error : std::runtime_error {
  explicit validation_error(const std::string& m) : std::runtime_error(m) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace svos
