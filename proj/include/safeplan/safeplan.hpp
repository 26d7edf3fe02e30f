#pragma once

#include "safeplan/errors.hpp"
#include "safeplan/text.hpp"
#include "safeplan/jsonl.hpp"
#include "safeplan/state.hpp"
#include "safeplan/actions.hpp"
#include "safeplan/prompt.hpp"
#include "safeplan/deontic.hpp"
#include "safeplan/verifier.hpp"
#include "safeplan/metrics.hpp"
#include "safeplan/provider.hpp"
#include "safeplan/pipeline.hpp"
#include "safeplan/sim.hpp"
