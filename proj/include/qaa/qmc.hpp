#pragma once

#include "qaa/qmc/chain.hpp"
#include "qaa/qmc/kernels.hpp"
#include "qaa/qmc/path.hpp"
#include "qaa/qmc/run.hpp"
