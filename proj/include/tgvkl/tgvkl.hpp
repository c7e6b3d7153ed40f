#pragma once

#include "tgvkl/admm.hpp"
#include "tgvkl/config.hpp"
#include "tgvkl/fft.hpp"
#include "tgvkl/hyper.hpp"
#include "tgvkl/image.hpp"
#include "tgvkl/image_io.hpp"
#include "tgvkl/metrics.hpp"
#include "tgvkl/noise.hpp"
#include "tgvkl/operators.hpp"
#include "tgvkl/phantom.hpp"
#include "tgvkl/prox.hpp"
#include "tgvkl/sweep.hpp"
#include "tgvkl/trace.hpp"
