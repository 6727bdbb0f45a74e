#pragma once

#include "ssdrl/error.hpp"
#include "ssdrl/softmin.hpp"
#include "ssdrl/models.hpp"
#include "ssdrl/adversary.hpp"
#include "ssdrl/trainer.hpp"
#include "ssdrl/lp.hpp"
#include "ssdrl/theory.hpp"
#include "ssdrl/data.hpp"
#include "ssdrl/svg.hpp"
#include "ssdrl/experiment.hpp"
