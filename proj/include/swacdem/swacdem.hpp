#pragma once

// Umbrella header for the swacdem library.

#include "swacdem/artifact.hpp"
#include "swacdem/baseline.hpp"
#include "swacdem/classify.hpp"
#include "swacdem/common.hpp"
#include "swacdem/dataset.hpp"
#include "swacdem/dbn.hpp"
#include "swacdem/experiments.hpp"
#include "swacdem/selftest.hpp"
#include "swacdem/sigproc.hpp"
