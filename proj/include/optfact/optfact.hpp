#pragma once

#include "optfact/factorial.hpp"
#include "optfact/links.hpp"
#include "optfact/rng.hpp"
#include "optfact/robustness.hpp"
#include "optfact/simulation.hpp"
#include "optfact/solver22.hpp"
