#pragma once

// DBRF: dynamic boosted random forests — cascaded hard-example mining on
// top of plain bagged CART forests.

#include "dbrf/common.hpp"
#include "dbrf/dataset.hpp"
#include "dbrf/tree.hpp"
#include "dbrf/forest.hpp"
#include "dbrf/hem.hpp"
#include "dbrf/evolve.hpp"
#include "dbrf/cascade.hpp"
#include "dbrf/metrics.hpp"
#include "dbrf/model_io.hpp"
