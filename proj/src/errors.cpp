#include "vvcguard/errors.hpp"

namespace vvcguard {

ConvergenceError::ConvergenceError(const std::string& what, double last_mismatch)
    : Error(what), last_mismatch_(last_mismatch) {}

SimulationError::SimulationError(const std::string& what, std::size_t step)
    : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

}  // namespace vvcguard
