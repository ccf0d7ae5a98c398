#pragma once

// Umbrella header for the detection library.

#include "echo/autograd.hpp"
#include "echo/clustering.hpp"
#include "echo/config.hpp"
#include "echo/contrastive.hpp"
#include "echo/diffusion.hpp"
#include "echo/encoders.hpp"
#include "echo/error.hpp"
#include "echo/extraction.hpp"
#include "echo/graph.hpp"
#include "echo/io.hpp"
#include "echo/metrics.hpp"
#include "echo/parallel.hpp"
#include "echo/pipeline.hpp"
#include "echo/rng.hpp"
#include "echo/router.hpp"
#include "echo/synth.hpp"
#include "echo/trainer.hpp"
#include "echo/weighted_graph.hpp"

namespace echo {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace echo
