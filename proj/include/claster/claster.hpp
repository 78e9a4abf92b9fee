#pragma once

#include "claster/checkpoint.hpp"
#include "claster/clustering.hpp"
#include "claster/common.hpp"
#include "claster/config.hpp"
#include "claster/dataset.hpp"
#include "claster/evaluation.hpp"
#include "claster/inference.hpp"
#include "claster/model_io.hpp"
#include "claster/neural.hpp"
#include "claster/pipeline.hpp"
#include "claster/reinforce.hpp"
#include "claster/representation.hpp"
#include "claster/scoring.hpp"
