#pragma once

// Umbrella header for the class-encoded principal component classifier.

#include "pcc/dataset.hpp"
#include "pcc/eigensolver.hpp"
#include "pcc/encoding.hpp"
#include "pcc/errors.hpp"
#include "pcc/experiments.hpp"
#include "pcc/matrix.hpp"
#include "pcc/model.hpp"
#include "pcc/parallel.hpp"
#include "pcc/rng.hpp"
