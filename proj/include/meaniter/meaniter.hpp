#pragma once

#include "meaniter/catalog.hpp"
#include "meaniter/errors.hpp"
#include "meaniter/functions.hpp"
#include "meaniter/gauss_iteration.hpp"
#include "meaniter/mean_families.hpp"
#include "meaniter/param.hpp"
#include "meaniter/real.hpp"
#include "meaniter/residuum.hpp"
#include "meaniter/roots.hpp"
