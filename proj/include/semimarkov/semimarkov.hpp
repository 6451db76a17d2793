#pragma once

#include "semimarkov/errors.hpp"
#include "semimarkov/expansion.hpp"
#include "semimarkov/kernel.hpp"
#include "semimarkov/matrix.hpp"
#include "semimarkov/moments.hpp"
#include "semimarkov/rational.hpp"
#include "semimarkov/renewal.hpp"
#include "semimarkov/report.hpp"
#include "semimarkov/series.hpp"
#include "semimarkov/simulate.hpp"
#include "semimarkov/validate.hpp"
