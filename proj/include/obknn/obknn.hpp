#pragma once

// Convenience umbrella: pulls in the whole library.

#include "obknn/bench.hpp"
#include "obknn/core.hpp"
#include "obknn/datastore.hpp"
#include "obknn/errors.hpp"
#include "obknn/eval.hpp"
#include "obknn/inference.hpp"
#include "obknn/io.hpp"
#include "obknn/rng.hpp"
#include "obknn/synthetic.hpp"
#include "obknn/tfidf.hpp"

