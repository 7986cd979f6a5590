#pragma once

#include "gnat/align.hpp"
#include "gnat/corpus.hpp"
#include "gnat/error.hpp"
#include "gnat/evalharness.hpp"
#include "gnat/json_io.hpp"
#include "gnat/sigstats.hpp"
#include "gnat/simscore.hpp"
#include "gnat/vectors.hpp"
