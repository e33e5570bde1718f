#pragma once

#include "pwq/error.hpp"
#include "pwq/types.hpp"
#include "pwq/linalg.hpp"
#include "pwq/core.hpp"
#include "pwq/lp.hpp"
#include "pwq/convex.hpp"
#include "pwq/stationarity.hpp"
#include "pwq/valueset.hpp"
#include "pwq/kink.hpp"
#include "pwq/enumerate.hpp"
#include "pwq/bstat.hpp"
#include "pwq/regression.hpp"
#include "pwq/problems.hpp"
#include "pwq/io.hpp"
