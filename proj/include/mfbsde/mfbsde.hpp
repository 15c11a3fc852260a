#pragma once

#include "bounds.hpp"
#include "bsde.hpp"
#include "driver.hpp"
#include "errors.hpp"
#include "forward.hpp"
#include "measure.hpp"
#include "parallel.hpp"
#include "particles.hpp"
#include "paths.hpp"
#include "pde.hpp"
#include "picard.hpp"
#include "regression.hpp"
#include "rng.hpp"
