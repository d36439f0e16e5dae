#pragma once

// Everything in one include.

#include "errors.hpp"
#include "numerics.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "axial.hpp"
#include "heat_kernel.hpp"
#include "potentials.hpp"
#include "kato.hpp"
#include "faber_krahn.hpp"
#include "mvi.hpp"
#include "stochastics.hpp"
#include "semigroup.hpp"
#include "manifest.hpp"
#include "runner.hpp"
#include "batteries.hpp"
