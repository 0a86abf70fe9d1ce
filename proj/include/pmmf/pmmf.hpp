// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pmmf/blocked_matrix.hpp"
#include "pmmf/clustering.hpp"
#include "pmmf/dense.hpp"
#include "pmmf/factorizer.hpp"
#include "pmmf/graphs.hpp"
#include "pmmf/io.hpp"
#include "pmmf/parallel.hpp"
#include "pmmf/partition.hpp"
#include "pmmf/report.hpp"
#include "pmmf/rng.hpp"
#include "pmmf/rotation.hpp"
#include "pmmf/serialize.hpp"
#include "pmmf/solver.hpp"
#include "pmmf/sparse.hpp"
#include "pmmf/transform_ops.hpp"
#include "pmmf/types.hpp"
