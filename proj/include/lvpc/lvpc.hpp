#pragma once

#include "lvpc/error.hpp"
#include "lvpc/calendar.hpp"
#include "lvpc/data.hpp"
#include "lvpc/design.hpp"
#include "lvpc/linalg.hpp"
#include "lvpc/optim.hpp"
#include "lvpc/lsr.hpp"
#include "lvpc/benchmarks.hpp"
#include "lvpc/methodology.hpp"
#include "lvpc/serialize.hpp"
#include "lvpc/backtest.hpp"
#include "lvpc/specgen.hpp"
#include "lvpc/eval.hpp"
#include "lvpc/config.hpp"
#include "lvpc/pipeline.hpp"
#include "lvpc/synthetic.hpp"
