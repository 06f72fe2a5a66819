#pragma once

// Umbrella header.

#include "lipquot/core.hpp"
#include "lipquot/space.hpp"
#include "lipquot/lp.hpp"
#include "lipquot/preimage.hpp"
#include "lipquot/lipfn.hpp"
#include "lipquot/affine_oracle.hpp"
#include "lipquot/uaap.hpp"
#include "lipquot/counterexamples.hpp"
#include "lipquot/quotient_zoo.hpp"
#include "lipquot/solvers.hpp"
#include "lipquot/martingale.hpp"
#include "lipquot/catalog.hpp"
#include "lipquot/io.hpp"
