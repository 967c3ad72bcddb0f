// Umbrella header.
#pragma once

#include "mindiff/config.hpp"
#include "mindiff/csv.hpp"
#include "mindiff/dataset.hpp"
#include "mindiff/errors.hpp"
#include "mindiff/features.hpp"
#include "mindiff/metrics.hpp"
#include "mindiff/mlp.hpp"
#include "mindiff/mmd.hpp"
#include "mindiff/rng.hpp"
#include "mindiff/streams.hpp"
#include "mindiff/sweep.hpp"
#include "mindiff/synth.hpp"
#include "mindiff/training.hpp"
#include "mindiff/verification.hpp"
