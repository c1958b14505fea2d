#pragma once

#include "handobj/error.hpp"
#include "handobj/grasp.hpp"
#include "handobj/losses.hpp"
#include "handobj/mesh.hpp"
#include "handobj/metrics.hpp"
#include "handobj/obj_io.hpp"
#include "handobj/refine.hpp"
#include "handobj/sim.hpp"
#include "handobj/spatial.hpp"
