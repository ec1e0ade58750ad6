#pragma once

#include "logagg/aggregate.hpp"
#include "logagg/csv.hpp"
#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"
#include "logagg/evalbench.hpp"
#include "logagg/glm.hpp"
#include "logagg/marginal.hpp"
#include "logagg/penalized.hpp"
#include "logagg/pipeline.hpp"
#include "logagg/seed.hpp"
#include "logagg/simgen.hpp"
