#pragma once

#include "grf/numerics/tensor.hpp"
#include "grf/numerics/tape.hpp"
#include "grf/numerics/ops.hpp"
#include "grf/numerics/grad_check.hpp"
#include "grf/numerics/init.hpp"
