#pragma once

#include "mcan/analysis.hpp"
#include "mcan/autodiff.hpp"
#include "mcan/checkpoint.hpp"
#include "mcan/commands.hpp"
#include "mcan/config.hpp"
#include "mcan/dataset.hpp"
#include "mcan/features.hpp"
#include "mcan/graph.hpp"
#include "mcan/hsc.hpp"
#include "mcan/layers.hpp"
#include "mcan/metrics.hpp"
#include "mcan/model.hpp"
#include "mcan/normalize.hpp"
#include "mcan/optim.hpp"
#include "mcan/run_config.hpp"
#include "mcan/series.hpp"
#include "mcan/synthetic.hpp"
#include "mcan/trainer.hpp"
