#pragma once

#include "bcinv/bcops.hpp"
#include "bcinv/error.hpp"
#include "bcinv/experiment.hpp"
#include "bcinv/forward.hpp"
#include "bcinv/io.hpp"
#include "bcinv/linalg.hpp"
#include "bcinv/ndmap.hpp"
#include "bcinv/parallel.hpp"
#include "bcinv/profile.hpp"
#include "bcinv/reginv.hpp"
#include "bcinv/rng.hpp"
#include "bcinv/strategy.hpp"
#include "bcinv/timegrid.hpp"
#include "bcinv/velocity.hpp"
#include "bcinv/profiles.hpp"
