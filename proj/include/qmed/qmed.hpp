#pragma once

#include "qmed/copula.hpp"
#include "qmed/dag.hpp"
#include "qmed/dataset.hpp"
#include "qmed/diagnostics.hpp"
#include "qmed/estimands.hpp"
#include "qmed/fit.hpp"
#include "qmed/marginal.hpp"
#include "qmed/mediation_tests.hpp"
#include "qmed/model.hpp"
#include "qmed/optim.hpp"
#include "qmed/parallel.hpp"
#include "qmed/quantreg.hpp"
#include "qmed/rng.hpp"
#include "qmed/sim.hpp"
#include "qmed/stats.hpp"
