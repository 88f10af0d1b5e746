#pragma once

#include "rentpas/snapshot.hpp"
#include "rentpas/synth.hpp"

namespace fixtures {

// One small GBT so pipeline tests stay quick.
inline rentpas::TrainOptions quick_options() {
  rentpas::TrainOptions opt;
  opt.grid = {{rentpas::RegressorKind::Gbt, {{"rounds", 60}, {"max_depth", 4}, {"learning_rate", 0.2}}}};
  opt.folds = 3;
  opt.seed = 11;
  opt.created_at = "2024-01-01T00:00:00Z";
  opt.attribution_rows = 300;
  return opt;
}

// 5000 rows so the holdout holds exactly 1000 and the preconditions pass.
inline const rentpas::Snapshot& trained() {
  static const rentpas::Snapshot snap = [] {
    return rentpas::train_pipeline(rentpas::synthesize_fixture(7, 5000).listings, quick_options());
  }();
  return snap;
}

}  // namespace fixtures
