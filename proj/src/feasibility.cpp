#include "rigid_recover/feasibility.hpp"

#include "rigid_recover/errors.hpp"

namespace rigid {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Infeasible: return "infeasible";
    case Verdict::Critical: return "critical";
    case Verdict::Overdetermined: return "overdetermined";
  }
  return "unknown";
}

FeasibilityReport dof_balance(const ProblemInstance& inst) {
  if (inst.points < 0 || inst.lines < 0) {
    throw Error(ErrorCode::InvalidInstance, "feature counts must be non-negative");
  }
  if (inst.points + inst.lines < 1) {
    throw Error(ErrorCode::InvalidInstance, "need at least one point or line");
  }
  if (inst.frames < 1) throw Error(ErrorCode::InvalidInstance, "need at least one frame");

  const long p = inst.points;
  const long s = inst.lines;
  const long k = inst.frames;
  const long motion = inst.projection == ProjectionKind::Perspective ? 6 : 5;

  FeasibilityReport r;
  r.instance = inst;
  r.dof = -1 + 3 * p + 4 * s + motion * (k - 1);
  r.info = k * (2 * p + 2 * s);
  r.margin = r.info - r.dof;
  r.verdict = r.margin < 0 ? Verdict::Infeasible : (r.margin == 0 ? Verdict::Critical : Verdict::Overdetermined);
  return r;
}

std::vector<FeasibilityReport> feasibility_table(const std::vector<ProblemInstance>& instances) {
  std::vector<FeasibilityReport> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    try {
      out.push_back(dof_balance(instances[i]));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidInstance, "instance " + std::to_string(i) + ": " + e.what(), i);
    }
  }
  return out;
}

std::vector<ProblemInstance> reference_instances() {
  using enum ProjectionKind;
  return {
      {4, 0, 2, Perspective}, {4, 0, 3, Perspective}, {5, 0, 2, Perspective}, {3, 1, 3, Perspective},
      {0, 6, 3, Perspective}, {3, 0, 3, Orthogonal},  {4, 0, 2, Orthogonal},
  };
}

}  // namespace rigid
