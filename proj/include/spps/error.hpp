#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spps {

/// Base for every error raised by the library. `module()` names the
/// subsystem that raised it so the CLI can report provenance.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Invalid user input: grids, config files, expressions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical step could not be carried out.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A numerical failure tied to one grid node.
class NodeError : public SolverError {
 public:
  NodeError(std::string module, const std::string& what, std::size_t node)
      : SolverError(std::move(module), what + " (node " + std::to_string(node) + ")"),
        node_(node) {}

  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

}  // namespace spps
