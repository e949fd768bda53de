#pragma once

// Umbrella header for the semhash library: discrete-latent variational
// auto-encoders over bag-of-words documents, unbiased gradient estimation
// through the Bernoulli code layer, and Hamming-distance retrieval.

#include "semhash/adam.hpp"
#include "semhash/checkpoint.hpp"
#include "semhash/code.hpp"
#include "semhash/config.hpp"
#include "semhash/corpus.hpp"
#include "semhash/errors.hpp"
#include "semhash/estimators.hpp"
#include "semhash/index.hpp"
#include "semhash/matrix.hpp"
#include "semhash/nn.hpp"
#include "semhash/objective.hpp"
#include "semhash/parallel.hpp"
#include "semhash/rng.hpp"
#include "semhash/tfidf.hpp"
#include "semhash/trainer.hpp"
#include "semhash/version.hpp"
