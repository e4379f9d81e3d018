#ifndef NEURAL_LINUCB_HPP_
#define NEURAL_LINUCB_HPP_

#include "neural_linucb/cli.hpp"
#include "neural_linucb/config.hpp"
#include "neural_linucb/environment.hpp"
#include "neural_linucb/network.hpp"
#include "neural_linucb/ntk.hpp"
#include "neural_linucb/policies.hpp"
#include "neural_linucb/ridge.hpp"
#include "neural_linucb/runner.hpp"
#include "neural_linucb/svg.hpp"
#include "neural_linucb/trace.hpp"

#endif  // NEURAL_LINUCB_HPP_
