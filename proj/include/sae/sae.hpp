#pragma once

/// @file sae.hpp Umbrella header for the stacked sparse-autoencoder library.

#include "sae/autoencoder.hpp"
#include "sae/checkpoint.hpp"
#include "sae/common.hpp"
#include "sae/eval.hpp"
#include "sae/idx.hpp"
#include "sae/matrix.hpp"
#include "sae/nn.hpp"
#include "sae/stack.hpp"
#include "sae/viz.hpp"
