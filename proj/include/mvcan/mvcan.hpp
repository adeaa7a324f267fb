#pragma once

// Umbrella header for the mvcan library: noise-robust multi-view
// clustering with decoupled per-view autoencoders, a non-parametric
// scaling iteration that builds a robust learning target, bi-level
// training, and a numerical verification harness.

#include "mvcan/adam.hpp"
#include "mvcan/dataset.hpp"
#include "mvcan/engine.hpp"
#include "mvcan/hungarian.hpp"
#include "mvcan/kmeans.hpp"
#include "mvcan/matrix.hpp"
#include "mvcan/metrics.hpp"
#include "mvcan/mlp.hpp"
#include "mvcan/model_io.hpp"
#include "mvcan/random.hpp"
#include "mvcan/soft_labels.hpp"
#include "mvcan/verify.hpp"
