// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ocpm/autodiff.hpp"
#include "ocpm/checkpoint.hpp"
#include "ocpm/config.hpp"
#include "ocpm/dataset.hpp"
#include "ocpm/error.hpp"
#include "ocpm/flatten.hpp"
#include "ocpm/graph.hpp"
#include "ocpm/model.hpp"
#include "ocpm/ocel.hpp"
#include "ocpm/pipeline.hpp"
#include "ocpm/time.hpp"
#include "ocpm/train.hpp"
