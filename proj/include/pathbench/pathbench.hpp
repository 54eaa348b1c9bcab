#pragma once

#include "dataset.hpp"
#include "error.hpp"
#include "extractor.hpp"
#include "features.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "predictions.hpp"
#include "random.hpp"
#include "retrieval.hpp"
#include "svm.hpp"
#include "tiler.hpp"

namespace pathbench {

inline constexpr const char* kVersion = "0.1.0";

} // namespace pathbench
