#pragma once

#include "c3/blake2b.hpp"
#include "c3/credit.hpp"
#include "c3/diagnostics.hpp"
#include "c3/env.hpp"
#include "c3/errors.hpp"
#include "c3/game.hpp"
#include "c3/harness.hpp"
#include "c3/optimizer.hpp"
#include "c3/parallel.hpp"
#include "c3/policy.hpp"
#include "c3/protocol.hpp"
#include "c3/replay.hpp"
#include "c3/rng.hpp"
