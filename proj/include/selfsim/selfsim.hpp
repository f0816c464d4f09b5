#pragma once

#include "selfsim/errors.hpp"
#include "selfsim/params.hpp"
#include "selfsim/linalg.hpp"
#include "selfsim/dynsys.hpp"
#include "selfsim/integrate.hpp"
#include "selfsim/parallel.hpp"
#include "selfsim/shoot.hpp"
#include "selfsim/profile.hpp"
#include "selfsim/barriers.hpp"
#include "selfsim/io.hpp"
