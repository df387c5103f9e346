#pragma once

#include "soilpick/rng.hpp"
#include "soilpick/image.hpp"
#include "soilpick/geometry.hpp"
#include "soilpick/terrain.hpp"
#include "soilpick/vision.hpp"
#include "soilpick/contour.hpp"
#include "soilpick/planner.hpp"
#include "soilpick/control.hpp"
#include "soilpick/scenario.hpp"
#include "soilpick/experiment.hpp"
#include "soilpick/json_io.hpp"
#include "soilpick/dataset_io.hpp"
