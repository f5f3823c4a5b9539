#pragma once

// Umbrella header.
#include "oldroyd/spectral_grid.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/fft.hpp"
#include "oldroyd/spectral_ops.hpp"
#include "oldroyd/random_field.hpp"
#include "oldroyd/dynamics.hpp"
#include "oldroyd/noise.hpp"
#include "oldroyd/noise_path.hpp"
#include "oldroyd/integrator.hpp"
#include "oldroyd/monitor.hpp"
#include "oldroyd/simulation.hpp"
#include "oldroyd/experiments.hpp"
#include "oldroyd/config.hpp"
