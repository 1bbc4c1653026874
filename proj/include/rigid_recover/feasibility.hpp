#pragma once

#include <string>
#include <vector>

#include "rigid_recover/geometry.hpp"

namespace rigid {

// p points and s lines traced over k frames.
struct ProblemInstance {
  int points = 0;
  int lines = 0;
  int frames = 1;
  ProjectionKind projection = ProjectionKind::Perspective;

  bool operator==(const ProblemInstance&) const = default;
};

enum class Verdict { Infeasible, Critical, Overdetermined };

const char* to_string(Verdict v);

struct FeasibilityReport {
  ProblemInstance instance;
  long dof = 0;
  long info = 0;
  long margin = 0;  // info - dof
  Verdict verdict = Verdict::Critical;

  bool operator==(const FeasibilityReport&) const = default;
};

// Degrees of freedom of the body plus motion against the image measurements:
//   dof  = -1 + 3p + 4s + c(k-1),  c = 6 (perspective) or 5 (orthogonal)
//   info = k(2p + 2s)
// A necessary condition only.
FeasibilityReport dof_balance(const ProblemInstance& inst);

// Reports in input order; an invalid entry throws InvalidInstance with its index.
std::vector<FeasibilityReport> feasibility_table(const std::vector<ProblemInstance>& instances);

// The seven reference configurations, in the order they are usually quoted.
std::vector<ProblemInstance> reference_instances();

}  // namespace rigid
