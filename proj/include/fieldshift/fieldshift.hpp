#pragma once

// Umbrella header for the whole library.

#include "fieldshift/adam.hpp"
#include "fieldshift/checkpoint.hpp"
#include "fieldshift/data_types.hpp"
#include "fieldshift/datapipe.hpp"
#include "fieldshift/errors.hpp"
#include "fieldshift/gan.hpp"
#include "fieldshift/gradcheck.hpp"
#include "fieldshift/imageops.hpp"
#include "fieldshift/layers.hpp"
#include "fieldshift/losses.hpp"
#include "fieldshift/metrics.hpp"
#include "fieldshift/models.hpp"
#include "fieldshift/network.hpp"
#include "fieldshift/nifti.hpp"
#include "fieldshift/ops.hpp"
#include "fieldshift/pgm.hpp"
#include "fieldshift/phantom.hpp"
#include "fieldshift/pool.hpp"
#include "fieldshift/rng.hpp"
#include "fieldshift/tensor.hpp"
#include "fieldshift/threads.hpp"
#include "fieldshift/train.hpp"
