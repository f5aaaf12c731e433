#pragma once

#include <stdexcept>
#include <string>

namespace statstab {

struct CutPointError : std::runtime_error {
  explicit CutPointError(const std::string& m) : std::runtime_error(m) {}
};
struct OutOfDomainError : std::runtime_error {
  explicit OutOfDomainError(const std::string& m) : std::runtime_error(m) {}
};
struct NonFiniteDerivative : std::runtime_error {
  explicit NonFiniteDerivative(const std::string& m) : std::runtime_error(m) {}
};
struct ConjugacyViolation : std::runtime_error {
  explicit ConjugacyViolation(const std::string& m) : std::runtime_error(m) {}
};
struct BadParameters : std::runtime_error {
  explicit BadParameters(const std::string& m) : std::runtime_error(m) {}
};
struct JTooSmall : std::runtime_error {
  explicit JTooSmall(const std::string& m) : std::runtime_error(m) {}
};
struct CellTooWide : std::runtime_error {
  explicit CellTooWide(const std::string& m) : std::runtime_error(m) {}
};
struct DegenerateCell : std::runtime_error {
  explicit DegenerateCell(const std::string& m) : std::runtime_error(m) {}
};
struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& m) : std::runtime_error(m) {}
};
struct NoContractingK : std::runtime_error {
  explicit NoContractingK(const std::string& m) : std::runtime_error(m) {}
};
struct NotEquilibrium : std::runtime_error {
  explicit NotEquilibrium(const std::string& m) : std::runtime_error(m) {}
};
struct OnStableManifold : std::runtime_error {
  explicit OnStableManifold(const std::string& m) : std::runtime_error(m) {}
};
struct NoReturn : std::runtime_error {
  explicit NoReturn(const std::string& m) : std::runtime_error(m) {}
};
struct HitSingularLeaf : std::runtime_error {
  explicit HitSingularLeaf(const std::string& m) : std::runtime_error(m) {}
};
struct StepFailure : std::runtime_error {
  explicit StepFailure(const std::string& m) : std::runtime_error(m) {}
};
struct FoliationAmbiguous : std::runtime_error {
  explicit FoliationAmbiguous(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace statstab
