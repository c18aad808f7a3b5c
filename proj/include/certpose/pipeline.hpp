#pragma once

#include <cstdint>
#include <span>

#include "certpose/certifier.hpp"
#include "certpose/geometry.hpp"
#include "certpose/initializer.hpp"
#include "certpose/manifold.hpp"
#include "certpose/problem.hpp"

namespace certpose {

struct PipelineConfig {
  InitMethod init = InitMethod::kEightPoint;
  /// Only used by InitMethod::kRandom.
  std::uint64_t init_seed = 0;
  RtrConfig rtr;
  CertifierConfig certifier;
};

struct PipelineResult {
  EssentialElement initial;
  SolveReport solve;
  CertificateReport certificate;
  /// Refined solution with the four-fold pose ambiguity resolved by cheirality.
  EssentialElement pose;
  /// False when cheirality voting failed; pose then equals solve.solution.
  bool pose_recovered = false;
};

/// Resolves the pose of an essential matrix, falling back to its own chart
/// when no candidate puts points in front of both cameras.
inline EssentialElement resolve_pose(const EssentialElement& e, std::span<const BearingPair> pairs, bool* ok = nullptr) {
  try {
    EssentialElement p = recover_pose(e.matrix(), pairs);
    if (ok) *ok = true;
    return p;
  } catch (const DegenerateInput&) {
    if (ok) *ok = false;
    return e;
  }
}

/// Refines a given initial guess on the manifold and certifies the result.
inline PipelineResult refine_and_certify(const ProblemData& data, std::span<const BearingPair> pairs,
                                         const EssentialElement& initial, const PipelineConfig& cfg = {}) {
  PipelineResult out;
  out.initial = initial;
  out.solve = solve_rtr(data, initial, cfg.rtr);
  out.certificate = certify(data, out.solve.solution, cfg.certifier);
  out.pose = resolve_pose(out.solve.solution, pairs, &out.pose_recovered);
  return out;
}

/// Initialize, refine on the manifold, certify. Throws whatever the
/// initializer or solver throws.
inline PipelineResult run_pipeline(const ProblemData& data, std::span<const BearingPair> pairs,
                                   const PipelineConfig& cfg = {}) {
  return refine_and_certify(data, pairs, initialize(cfg.init, pairs, cfg.init_seed), cfg);
}

inline PipelineResult run_pipeline(std::span<const BearingPair> pairs, const PipelineConfig& cfg = {}) {
  const ProblemData data = build_data_matrix(pairs);
  return run_pipeline(data, pairs, cfg);
}

}  // namespace certpose
