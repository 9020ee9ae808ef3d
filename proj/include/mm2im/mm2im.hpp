#pragma once

#include "mm2im/error.hpp"
#include "mm2im/shape.hpp"
#include "mm2im/tensor.hpp"
#include "mm2im/quant.hpp"
#include "mm2im/reference.hpp"
#include "mm2im/mapping.hpp"
#include "mm2im/isa.hpp"
#include "mm2im/config.hpp"
#include "mm2im/simulator.hpp"
#include "mm2im/driver.hpp"
#include "mm2im/perf_model.hpp"
#include "mm2im/bench.hpp"
