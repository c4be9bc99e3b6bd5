#pragma once

#include "epgnn/coldstart.hpp"
#include "epgnn/config.hpp"
#include "epgnn/evaluator.hpp"
#include "epgnn/expansion.hpp"
#include "epgnn/graph.hpp"
#include "epgnn/io.hpp"
#include "epgnn/model.hpp"
#include "epgnn/rng.hpp"
#include "epgnn/sampler.hpp"
#include "epgnn/trainer.hpp"
#include "epgnn/vecmath.hpp"
#include "epgnn/walker.hpp"
