#pragma once

// Gradient-ascent unlearning for margin-maximizing predictors: datasets and
// audits, linear / two-layer ReLU models, GD training and a max-margin
// oracle, KKT certification via NNLS multiplier recovery, the ascent
// unlearners with their correction witness, and the success metrics.

#include "unlearn/common.hpp"
#include "unlearn/linalg.hpp"
#include "unlearn/rng.hpp"
#include "unlearn/dataset.hpp"
#include "unlearn/model.hpp"
#include "unlearn/nnls.hpp"
#include "unlearn/trainer.hpp"
#include "unlearn/kkt.hpp"
#include "unlearn/unlearner.hpp"
#include "unlearn/evaluator.hpp"
#include "unlearn/serialize.hpp"
#include "unlearn/experiment.hpp"
