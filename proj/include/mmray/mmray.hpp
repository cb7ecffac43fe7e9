#pragma once

// Site-specific mm-wave multipath engine: image-method ray tracing with
// reflection, transmission, wedge diffraction and diffuse scattering, plus
// channel metrics and reference-model baselines.

#include "mmray/antenna.hpp"
#include "mmray/baselines.hpp"
#include "mmray/fresnel.hpp"
#include "mmray/geometry.hpp"
#include "mmray/material.hpp"
#include "mmray/metrics.hpp"
#include "mmray/permittivity.hpp"
#include "mmray/propagation.hpp"
#include "mmray/scattering.hpp"
#include "mmray/scenario_io.hpp"
#include "mmray/scene.hpp"
#include "mmray/tracer.hpp"
#include "mmray/utd.hpp"
