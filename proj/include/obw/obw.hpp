#pragma once

// Oval-billiard Wigner analysis: eigenmodes, phase-space negativity, and the
// Fisher control of its parameter dependence.

#include "obw/fisher.hpp"
#include "obw/geometry.hpp"
#include "obw/helmholtz.hpp"
#include "obw/io.hpp"
#include "obw/negativity.hpp"
#include "obw/numeric.hpp"
#include "obw/sweep.hpp"
#include "obw/wigner.hpp"
