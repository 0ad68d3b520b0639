#ifndef IBFLOW_IBFLOW_HPP
#define IBFLOW_IBFLOW_HPP

// Umbrella header: mutual-information estimation with trained neural
// critics, dynamic information-bottleneck training over per-layer
// representations, generalized effective dimensionality, and
// information-plane export.

#include "ibflow/critic.hpp"
#include "ibflow/effdim.hpp"
#include "ibflow/error.hpp"
#include "ibflow/flownib.hpp"
#include "ibflow/infoplane.hpp"
#include "ibflow/io.hpp"
#include "ibflow/matrix.hpp"
#include "ibflow/mi.hpp"
#include "ibflow/parallel.hpp"
#include "ibflow/reps.hpp"
#include "ibflow/rng.hpp"
#include "ibflow/schedule.hpp"
#include "ibflow/trace_io.hpp"

#endif  // IBFLOW_IBFLOW_HPP
