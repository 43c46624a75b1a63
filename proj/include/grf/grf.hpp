#pragma once

#include "grf/checkpoint.hpp"
#include "grf/config.hpp"
#include "grf/context_encoder.hpp"
#include "grf/default_tables.hpp"
#include "grf/error.hpp"
#include "grf/generator.hpp"
#include "grf/graph_encoder.hpp"
#include "grf/grounding.hpp"
#include "grf/kg_store.hpp"
#include "grf/metrics.hpp"
#include "grf/model.hpp"
#include "grf/numerics.hpp"
#include "grf/pipeline.hpp"
#include "grf/reasoning_flow.hpp"
#include "grf/synth.hpp"
#include "grf/text.hpp"
#include "grf/training.hpp"
