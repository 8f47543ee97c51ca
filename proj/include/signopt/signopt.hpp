#pragma once

#include "signopt/attacks.hpp"
#include "signopt/errors.hpp"
#include "signopt/estimators.hpp"
#include "signopt/fixtures.hpp"
#include "signopt/geometry.hpp"
#include "signopt/harness.hpp"
#include "signopt/io.hpp"
#include "signopt/oracle.hpp"
#include "signopt/random.hpp"
#include "signopt/selfcheck.hpp"
#include "signopt/vec.hpp"
