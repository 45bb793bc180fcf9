#pragma once

#include "varlasso/backtest.hpp"
#include "varlasso/benchmarks.hpp"
#include "varlasso/error.hpp"
#include "varlasso/evaluate.hpp"
#include "varlasso/lasso.hpp"
#include "varlasso/panel.hpp"
#include "varlasso/preprocess.hpp"
#include "varlasso/synth.hpp"
#include "varlasso/varmodel.hpp"
