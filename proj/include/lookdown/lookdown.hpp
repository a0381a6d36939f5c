#pragma once

#include "additive.hpp"
#include "branching.hpp"
#include "config.hpp"
#include "engine.hpp"
#include "events.hpp"
#include "experiments.hpp"
#include "generators.hpp"
#include "measures.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "product_htransform.hpp"
#include "random.hpp"
#include "stats.hpp"
