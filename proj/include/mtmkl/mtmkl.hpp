#pragma once

#include "mtmkl/data.hpp"
#include "mtmkl/epf.hpp"
#include "mtmkl/errors.hpp"
#include "mtmkl/kernel.hpp"
#include "mtmkl/learners.hpp"
#include "mtmkl/model.hpp"
#include "mtmkl/smo.hpp"
#include "mtmkl/theta.hpp"
#include "mtmkl/types.hpp"
