#pragma once

#include "certpose/errors.hpp"
#include "certpose/geometry.hpp"
#include "certpose/problem.hpp"
#include "certpose/random.hpp"
#include "certpose/synth.hpp"
#include "certpose/initializer.hpp"
#include "certpose/manifold.hpp"
#include "certpose/certifier.hpp"
#include "certpose/ransac.hpp"
#include "certpose/pipeline.hpp"
#include "certpose/bench.hpp"
#include "certpose/io.hpp"
