#pragma once

#include <stdexcept>
#include <string>

namespace lamg {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Geometry rejected at load/construction time. Inputs are never repaired.
struct InvalidMesh : Error {
  using Error::Error;
};

// Interior rejection sampling hit its attempt budget (thin or degenerate domain).
struct RejectionBudgetExceeded : Error {
  using Error::Error;
};

// FEM assembly met a tet whose volume is below the degeneracy floor.
struct DegenerateElement : Error {
  using Error::Error;
};

// Iterative solve stopped without meeting the residual contract.
struct NoConvergence : Error {
  using Error::Error;
};

struct PointOutsideMesh : Error {
  using Error::Error;
};

// Reference norm too small for a relative error to mean anything.
struct ZeroReference : Error {
  using Error::Error;
};

// Sizing request below the resolvable floor of the lattice mesher.
struct FieldTooFine : Error {
  using Error::Error;
};

// Mesher could not produce a valid conforming mesh for this input.
struct MeshingFailed : Error {
  using Error::Error;
};

// A sample point ended up with no usable graph neighbors.
struct IsolatedNode : Error {
  using Error::Error;
};

struct TrainingDiverged : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace lamg
