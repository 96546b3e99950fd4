// SPDX-License-Identifier: Apache-2.0
#pragma once

// Umbrella header.
#include "ponv/automl.hpp"
#include "ponv/common.hpp"
#include "ponv/config.hpp"
#include "ponv/csv.hpp"
#include "ponv/dataset.hpp"
#include "ponv/evaluation.hpp"
#include "ponv/explain.hpp"
#include "ponv/model.hpp"
#include "ponv/pipeline.hpp"
#include "ponv/rng.hpp"
#include "ponv/runner.hpp"
#include "ponv/schema.hpp"
#include "ponv/scores.hpp"
#include "ponv/splitter.hpp"
#include "ponv/stats.hpp"
#include "ponv/svg.hpp"
