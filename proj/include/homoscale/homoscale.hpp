#ifndef HOMOSCALE_HOMOSCALE_HPP
#define HOMOSCALE_HOMOSCALE_HPP

#include "homoscale/artifacts.hpp"
#include "homoscale/bvp.hpp"
#include "homoscale/cell.hpp"
#include "homoscale/coefficient.hpp"
#include "homoscale/corrector.hpp"
#include "homoscale/effective.hpp"
#include "homoscale/experiments.hpp"
#include "homoscale/field.hpp"
#include "homoscale/flux.hpp"
#include "homoscale/pipeline.hpp"
#include "homoscale/quadrature.hpp"
#include "homoscale/scales.hpp"
#include "homoscale/snapshot.hpp"

#endif  // HOMOSCALE_HOMOSCALE_HPP
