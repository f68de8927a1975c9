#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ptrn {

// Invalid configs or inputs the caller can fix. The CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A pipeline stage failed at runtime. The CLI maps these to exit code 3.
struct StageError : std::runtime_error {
  StageError(std::string stage_name, const std::string& what)
      : std::runtime_error("[" + stage_name + "] " + what), stage(std::move(stage_name)) {}
  std::string stage;
};

}  // namespace ptrn
