#pragma once

#include "gwselect/baselines.hpp"
#include "gwselect/embed_io.hpp"
#include "gwselect/error.hpp"
#include "gwselect/gw.hpp"
#include "gwselect/linear_ot.hpp"
#include "gwselect/mmspace.hpp"
#include "gwselect/report.hpp"
#include "gwselect/rng.hpp"
#include "gwselect/selection.hpp"
#include "gwselect/theory.hpp"
