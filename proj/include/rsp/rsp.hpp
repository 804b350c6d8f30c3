#pragma once

#include "rsp/errors.hpp"
#include "rsp/grid.hpp"
#include "rsp/lattice.hpp"
#include "rsp/rsrg.hpp"
#include "rsp/flow.hpp"
#include "rsp/krylov.hpp"
#include "rsp/spinsim.hpp"
#include "rsp/sweep.hpp"
#include "rsp/fidelity.hpp"
#include "rsp/ensemble.hpp"
#include "rsp/io.hpp"
