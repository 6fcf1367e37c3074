#pragma once

#include "gwcouple/chain.hpp"
#include "gwcouple/coupler.hpp"
#include "gwcouple/flow.hpp"
#include "gwcouple/infinite.hpp"
#include "gwcouple/ladder.hpp"
#include "gwcouple/numerics.hpp"
#include "gwcouple/parallel.hpp"
#include "gwcouple/rational.hpp"
#include "gwcouple/rng.hpp"
#include "gwcouple/trees.hpp"
#include "gwcouple/unif_sampling.hpp"
#include "gwcouple/verify.hpp"
#include "gwcouple/cli.hpp"
