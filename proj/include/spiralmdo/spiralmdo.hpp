#pragma once

// Convenience umbrella: the whole library in dependency order.

#include "spiralmdo/constants.hpp"
#include "spiralmdo/scaling.hpp"
#include "spiralmdo/dynamics.hpp"
#include "spiralmdo/power.hpp"
#include "spiralmdo/propulsion.hpp"
#include "spiralmdo/sizing.hpp"
#include "spiralmdo/radau.hpp"
#include "spiralmdo/nlp.hpp"
#include "spiralmdo/scenario_config.hpp"
#include "spiralmdo/fourier_guess.hpp"
#include "spiralmdo/transcription.hpp"
#include "spiralmdo/propagate.hpp"
#include "spiralmdo/scenario.hpp"
