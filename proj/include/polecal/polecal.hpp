#ifndef POLECAL_POLECAL_HPP
#define POLECAL_POLECAL_HPP

// Umbrella header: the whole pole-based dual-LiDAR calibration toolkit.

#include "polecal/cloud.hpp"
#include "polecal/disambiguate.hpp"
#include "polecal/error.hpp"
#include "polecal/extraction.hpp"
#include "polecal/geometry.hpp"
#include "polecal/icp.hpp"
#include "polecal/io.hpp"
#include "polecal/kdtree.hpp"
#include "polecal/metrics.hpp"
#include "polecal/pipeline.hpp"
#include "polecal/rng.hpp"
#include "polecal/simulator.hpp"
#include "polecal/solver.hpp"

#endif  // POLECAL_POLECAL_HPP
