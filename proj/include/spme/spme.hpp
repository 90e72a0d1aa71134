#pragma once

#include "spme/assembly.hpp"
#include "spme/basis.hpp"
#include "spme/grid.hpp"
#include "spme/harness.hpp"
#include "spme/noise.hpp"
#include "spme/quadrature.hpp"
#include "spme/reference.hpp"
#include "spme/sparse.hpp"
#include "spme/stepper.hpp"
#include "spme/transfer.hpp"
