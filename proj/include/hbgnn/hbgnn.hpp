#ifndef HBGNN_HBGNN_HPP_
#define HBGNN_HBGNN_HPP_

// Hierarchical BiGraph Neural Network: umbrella header.

#include "hbgnn/bigraph.hpp"
#include "hbgnn/checkpoint.hpp"
#include "hbgnn/data.hpp"
#include "hbgnn/error.hpp"
#include "hbgnn/model.hpp"
#include "hbgnn/nn.hpp"
#include "hbgnn/optim.hpp"
#include "hbgnn/params.hpp"
#include "hbgnn/rng.hpp"
#include "hbgnn/tape.hpp"
#include "hbgnn/tensor.hpp"
#include "hbgnn/train.hpp"

#endif  // HBGNN_HBGNN_HPP_
