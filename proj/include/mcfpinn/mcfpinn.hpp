#pragma once

#include "adam.hpp"
#include "benchmark.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "fractional.hpp"
#include "loss.hpp"
#include "mlp.hpp"
#include "problem.hpp"
#include "sampling.hpp"
#include "special.hpp"
#include "theory.hpp"
#include "training.hpp"
