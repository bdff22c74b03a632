#pragma once

#include "madsa/tensor/checkpoint.hpp"
#include "madsa/tensor/gradcheck.hpp"
#include "madsa/tensor/init.hpp"
#include "madsa/tensor/layers.hpp"
#include "madsa/tensor/ops.hpp"
#include "madsa/tensor/optim.hpp"
#include "madsa/tensor/rng.hpp"
#include "madsa/tensor/tape.hpp"
#include "madsa/tensor/tensor.hpp"
