#pragma once

#include <lsr/appearance.hpp>
#include <lsr/dataset.hpp>
#include <lsr/error.hpp>
#include <lsr/evaluation.hpp>
#include <lsr/features.hpp>
#include <lsr/geometry.hpp>
#include <lsr/geometry_validator.hpp>
#include <lsr/ibug68.hpp>
#include <lsr/image.hpp>
#include <lsr/parallel.hpp>
#include <lsr/png_io.hpp>
#include <lsr/regressor.hpp>
#include <lsr/reinforce.hpp>
#include <lsr/ridge.hpp>
#include <lsr/rng.hpp>
#include <lsr/serialization.hpp>
#include <lsr/synthetic.hpp>
