#pragma once

#include "scmech/error.hpp"
#include "scmech/bundle.hpp"
#include "scmech/roots.hpp"
#include "scmech/domain.hpp"
#include "scmech/measure.hpp"
#include "scmech/mechanism.hpp"
#include "scmech/revenue.hpp"
#include "scmech/countable.hpp"
#include "scmech/verify.hpp"
#include "scmech/optimize.hpp"
#include "scmech/multibuyer.hpp"
#include "scmech/io.hpp"
