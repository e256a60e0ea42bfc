#pragma once

// Umbrella header for the library part (everything except the CLI).

#include "revar/backtest.hpp"
#include "revar/bootstrap.hpp"
#include "revar/config.hpp"
#include "revar/diagnostics.hpp"
#include "revar/distributions.hpp"
#include "revar/error.hpp"
#include "revar/evaluation.hpp"
#include "revar/forecast.hpp"
#include "revar/market_data.hpp"
#include "revar/mcmc.hpp"
#include "revar/mcs.hpp"
#include "revar/ml_fit.hpp"
#include "revar/model.hpp"
#include "revar/random.hpp"
#include "revar/realized_measures.hpp"
