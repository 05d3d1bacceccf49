#pragma once

#include "core.hpp"
#include "quadrature.hpp"
#include "parallel.hpp"
#include "spectra.hpp"
#include "selfconsistent.hpp"
#include "randomfeatures.hpp"
#include "contour.hpp"
#include "pencil.hpp"
#include "simulate.hpp"
#include "dataio.hpp"
