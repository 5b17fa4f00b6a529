#pragma once

#include "mvfactor/error.hpp"
#include "mvfactor/linalg.hpp"
#include "mvfactor/series.hpp"
#include "mvfactor/dgp.hpp"
#include "mvfactor/factor_estimation.hpp"
#include "mvfactor/evaluation.hpp"
#include "mvfactor/io.hpp"
#include "mvfactor/config.hpp"
