#ifndef CSACDRIFT_CSACDRIFT_HPP
#define CSACDRIFT_CSACDRIFT_HPP

#include "csacdrift/error.hpp"
#include "csacdrift/geometry.hpp"
#include "csacdrift/linalg.hpp"
#include "csacdrift/models.hpp"
#include "csacdrift/quality.hpp"
#include "csacdrift/random.hpp"
#include "csacdrift/simulator.hpp"
#include "csacdrift/timeseries.hpp"

#endif
