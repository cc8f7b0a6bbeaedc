#pragma once

#include "cdpanel/errors.hpp"
#include "cdpanel/panel.hpp"
#include "cdpanel/factor_estimation.hpp"
#include "cdpanel/rng.hpp"
#include "cdpanel/cd_tests.hpp"
#include "cdpanel/cce.hpp"
#include "cdpanel/dgp.hpp"
#include "cdpanel/monte_carlo.hpp"
#include "cdpanel/csv.hpp"
#include "cdpanel/records.hpp"
#include "cdpanel/experiment.hpp"
