#pragma once

#include "entcat/datagen.hpp"
#include "entcat/error.hpp"
#include "entcat/experiments.hpp"
#include "entcat/golden.hpp"
#include "entcat/majorization.hpp"
#include "entcat/mlp.hpp"
#include "entcat/random.hpp"
