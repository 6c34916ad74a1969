#pragma once

#include "icl_sfm/errors.hpp"
#include "icl_sfm/geometry.hpp"
#include "icl_sfm/scene.hpp"
#include "icl_sfm/observer.hpp"
#include "icl_sfm/planner.hpp"
#include "icl_sfm/config.hpp"
#include "icl_sfm/harness.hpp"
#include "icl_sfm/artifacts.hpp"
