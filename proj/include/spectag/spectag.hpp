#pragma once

// Umbrella header for the spectag library.

#include "spectag/commands.hpp"
#include "spectag/confidence.hpp"
#include "spectag/coupling.hpp"
#include "spectag/dataset.hpp"
#include "spectag/errors.hpp"
#include "spectag/features.hpp"
#include "spectag/grid.hpp"
#include "spectag/image.hpp"
#include "spectag/multiclass.hpp"
#include "spectag/phantom.hpp"
#include "spectag/pipeline.hpp"
#include "spectag/platt.hpp"
#include "spectag/png_io.hpp"
#include "spectag/stack_io.hpp"
#include "spectag/superpixel.hpp"
#include "spectag/svm.hpp"
