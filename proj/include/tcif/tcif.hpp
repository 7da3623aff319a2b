#pragma once

#include "tcif/core.hpp"
#include "tcif/ops.hpp"
#include "tcif/conv.hpp"
#include "tcif/gradcheck.hpp"
#include "tcif/pmde.hpp"
#include "tcif/tcia.hpp"
#include "tcif/tcbm.hpp"
#include "tcif/network.hpp"
#include "tcif/data_synth.hpp"
#include "tcif/metrics.hpp"
