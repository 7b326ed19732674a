#ifndef HTRM_HTRM_HPP
#define HTRM_HTRM_HPP

#include "htrm/airy.hpp"
#include "htrm/config.hpp"
#include "htrm/det_functional.hpp"
#include "htrm/ensembles.hpp"
#include "htrm/errors.hpp"
#include "htrm/experiments.hpp"
#include "htrm/matrix.hpp"
#include "htrm/parallel.hpp"
#include "htrm/pointproc.hpp"
#include "htrm/quadrature.hpp"
#include "htrm/reference_laws.hpp"
#include "htrm/rng.hpp"
#include "htrm/spectra.hpp"
#include "htrm/tails.hpp"

#endif
