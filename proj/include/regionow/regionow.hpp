#pragma once

#include "datamodel.hpp"
#include "density.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "ingest.hpp"
#include "kalman.hpp"
#include "linalg.hpp"
#include "nowcast.hpp"
#include "parallel.hpp"
#include "priors.hpp"
#include "quarter.hpp"
#include "sampler.hpp"
#include "statespace.hpp"
#include "synth.hpp"
