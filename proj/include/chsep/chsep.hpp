#pragma once

#include "chsep/error.hpp"
#include "chsep/grid.hpp"
#include "chsep/linear_solvers.hpp"
#include "chsep/norms.hpp"
#include "chsep/snapshot.hpp"
#include "chsep/physics.hpp"
#include "chsep/ch_core.hpp"
#include "chsep/stationary.hpp"
#include "chsep/diagnostics.hpp"
#include "chsep/mac.hpp"
#include "chsep/agg.hpp"
#include "chsep/config.hpp"
#include "chsep/series_io.hpp"
#include "chsep/app.hpp"
