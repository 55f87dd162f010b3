#pragma once

#include "partx/bench.hpp"
#include "partx/core.hpp"
#include "partx/diagnostics.hpp"
#include "partx/errors.hpp"
#include "partx/gp.hpp"
#include "partx/hyperbox.hpp"
#include "partx/normal.hpp"
#include "partx/partition.hpp"
#include "partx/random.hpp"
#include "partx/sampling.hpp"
