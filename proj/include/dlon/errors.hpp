#pragma once

#include <stdexcept>
#include <string>

namespace dlon {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Simulation
struct NoHeldTerminal : Error { using Error::Error; };
struct GraspInfeasible : Error { using Error::Error; };
struct MateNotAtGoal : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };

// Dataset
struct SeriesTooShort : Error { using Error::Error; };
struct IncompatibleRates : Error { using Error::Error; };
struct SchemaMismatch : Error { using Error::Error; };
struct MissingDataset : Error { using Error::Error; };

// System identification / models
struct DimensionMismatch : Error { using Error::Error; };
struct MissingRigidTerms : Error { using Error::Error; };
struct DegenerateVariance : Error { using Error::Error; };
struct TrajectoryTooShort : Error { using Error::Error; };

// Control
struct SolverDiverged : Error { using Error::Error; };

// I/O
struct IoError : Error { using Error::Error; };

}  // namespace dlon
