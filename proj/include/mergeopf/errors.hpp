#pragma once

#include <stdexcept>
#include <string>

namespace mergeopf {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed interchange document (bad JSON, missing/ill-typed keys, bad version).
struct SchemaError : Error {
  using Error::Error;
};

// A cross-reference (bus_id, area_id, branch_id, ...) does not resolve.
struct ReferenceError : Error {
  explicit ReferenceError(const std::string& entity_id, const std::string& what)
      : Error(what), entity(entity_id) {}
  std::string entity;
};

// A domain invariant is violated (v_min > v_max, duplicate id, ...).
struct InvariantError : Error {
  explicit InvariantError(const std::string& entity_id, const std::string& what)
      : Error(what), entity(entity_id) {}
  std::string entity;
};

// Newton load flow failed to reach the residual tolerance.
struct NonConvergence : Error {
  using Error::Error;
};

struct SingularJacobian : Error {
  using Error::Error;
};

// A callback produced a non-finite value; index identifies the component.
struct CallbackError : Error {
  CallbackError(int bad_index, const std::string& what) : Error(what), index(bad_index) {}
  int index;
};

struct GenerationFailure : Error {
  using Error::Error;
};

struct UnknownArea : Error {
  explicit UnknownArea(const std::string& area_id, const std::string& what)
      : Error(what), area(area_id) {}
  std::string area;
};

}  // namespace mergeopf
