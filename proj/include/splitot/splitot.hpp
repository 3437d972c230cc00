// Umbrella header.
#pragma once

#include "splitot/common.hpp"
#include "splitot/cost_model.hpp"
#include "splitot/geometry.hpp"
#include "splitot/level_curve.hpp"
#include "splitot/measures.hpp"
#include "splitot/oracle.hpp"
#include "splitot/quotient.hpp"
#include "splitot/splitting.hpp"
#include "splitot/scenario.hpp"
