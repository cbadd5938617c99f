#pragma once

#include "hdm/csv.hpp"
#include "hdm/error.hpp"
#include "hdm/forward_process.hpp"
#include "hdm/heat_operator.hpp"
#include "hdm/image_io.hpp"
#include "hdm/linalg.hpp"
#include "hdm/metrics.hpp"
#include "hdm/noise_schedule.hpp"
#include "hdm/operator_cache.hpp"
#include "hdm/predictor.hpp"
#include "hdm/property_checks.hpp"
#include "hdm/reverse_posterior.hpp"
#include "hdm/run_config.hpp"
#include "hdm/sampler.hpp"
#include "hdm/synthetic.hpp"
#include "hdm/trainer.hpp"
