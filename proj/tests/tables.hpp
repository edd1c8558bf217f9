#pragma once

// Default-configuration value tables, solved once and kept in the build tree.

#include <filesystem>
#include <memory>

#include "hgp/sim_harness.hpp"

namespace hgp::testing {

inline std::filesystem::path table_cache() { return HGP_TABLE_CACHE; }

inline SolverInputs default_inputs(ModelTag model, double beta) {
  SolverInputs in;
  in.model = model;
  in.grid = model == ModelTag::k3d ? GridSpec::default_3d() : GridSpec::default_4d();
  in.actions = model == ModelTag::k3d ? ActionGrid::default_3d() : ActionGrid::default_4d();
  in.params.beta = beta;
  return in;
}

inline std::filesystem::path table_path(ModelTag model, double beta) {
  return table_cache() / table_cache_key(default_inputs(model, beta));
}

inline std::shared_ptr<const ValueTable> default_table(ModelTag model, double beta) {
  return solve_cached(default_inputs(model, beta), table_cache());
}

}  // namespace hgp::testing
