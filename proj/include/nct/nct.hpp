#pragma once

// Everything except the command-line layer.

#include "nct/error.hpp"
#include "nct/rng.hpp"

#include "nct/numeric/adam.hpp"
#include "nct/numeric/finite_diff.hpp"
#include "nct/numeric/mlp.hpp"
#include "nct/numeric/parameter_vector.hpp"
#include "nct/numeric/tape.hpp"

#include "nct/noise/process.hpp"
#include "nct/noise/schedule.hpp"

#include "nct/models/adapter.hpp"
#include "nct/models/checkpoint.hpp"
#include "nct/models/condition.hpp"
#include "nct/models/ema.hpp"
#include "nct/models/generator.hpp"

#include "nct/training/baselines.hpp"
#include "nct/training/config.hpp"
#include "nct/training/distance.hpp"
#include "nct/training/dual.hpp"
#include "nct/training/losses.hpp"
#include "nct/training/nct.hpp"
#include "nct/training/pretrain.hpp"
#include "nct/training/targets.hpp"
#include "nct/training/train_log.hpp"

#include "nct/eval/gradcheck.hpp"
#include "nct/eval/gradcheck_suite.hpp"
#include "nct/eval/independence.hpp"
#include "nct/eval/kernel.hpp"
#include "nct/eval/metrics.hpp"
#include "nct/eval/mmd.hpp"
#include "nct/eval/oracle.hpp"
#include "nct/eval/suite.hpp"

#include "nct/io/config.hpp"
#include "nct/io/csv.hpp"
#include "nct/io/manifest.hpp"
#include "nct/io/svg.hpp"
#include "nct/io/toml.hpp"
