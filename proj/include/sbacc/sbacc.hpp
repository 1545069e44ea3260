#pragma once

#include "bounds.hpp"
#include "config.hpp"
#include "dct_code.hpp"
#include "errors.hpp"
#include "functions.hpp"
#include "harness.hpp"
#include "numerics.hpp"
#include "protocol.hpp"
#include "random.hpp"
#include "wire.hpp"
