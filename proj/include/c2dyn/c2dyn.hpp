#pragma once

#include "config.hpp"
#include "cycles.hpp"
#include "green.hpp"
#include "lyapunov.hpp"
#include "map.hpp"
#include "measures.hpp"
#include "model.hpp"
#include "preimage.hpp"
#include "rays.hpp"
#include "render.hpp"
