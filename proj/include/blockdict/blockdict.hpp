#pragma once

// Umbrella include for the whole library.

#include "core.hpp"
#include "rng.hpp"
#include "io.hpp"
#include "sparse_coding.hpp"
#include "block_structuring.hpp"
#include "dict_learning.hpp"
#include "synthetic.hpp"
#include "analysis.hpp"
#include "classify.hpp"
#include "experiments.hpp"
