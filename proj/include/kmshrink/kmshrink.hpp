#pragma once

// Kernel mean shrinkage estimators, leave-one-out shrinkage selection,
// shrinkage centering and covariance operators for kernel PCA, and the exact
// synthetic oracle used to score them.

#include "kmshrink/centering.hpp"
#include "kmshrink/config.hpp"
#include "kmshrink/csv.hpp"
#include "kmshrink/estimators.hpp"
#include "kmshrink/experiments.hpp"
#include "kmshrink/kernels.hpp"
#include "kmshrink/log.hpp"
#include "kmshrink/model_selection.hpp"
#include "kmshrink/operators.hpp"
#include "kmshrink/oracle.hpp"
#include "kmshrink/rng.hpp"
#include "kmshrink/serialize.hpp"
#include "kmshrink/spectral.hpp"
#include "kmshrink/types.hpp"
