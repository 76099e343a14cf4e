#pragma once

#include "mohv/config.hpp"
#include "mohv/dynamic_loss.hpp"
#include "mohv/errors.hpp"
#include "mohv/experiment.hpp"
#include "mohv/hypervolume.hpp"
#include "mohv/log.hpp"
#include "mohv/neural.hpp"
#include "mohv/pareto.hpp"
#include "mohv/problems.hpp"
#include "mohv/report.hpp"
#include "mohv/trainer.hpp"
