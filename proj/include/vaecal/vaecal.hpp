#pragma once

#include "vaecal/adam.hpp"
#include "vaecal/data.hpp"
#include "vaecal/dense.hpp"
#include "vaecal/errors.hpp"
#include "vaecal/evaluate.hpp"
#include "vaecal/experiment.hpp"
#include "vaecal/metrics.hpp"
#include "vaecal/model_io.hpp"
#include "vaecal/report.hpp"
#include "vaecal/train.hpp"
#include "vaecal/vae.hpp"
