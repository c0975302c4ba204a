#pragma once

#include "blv/evaluation.hpp"
#include "blv/inference.hpp"
#include "blv/io.hpp"
#include "blv/learning.hpp"
#include "blv/model.hpp"
#include "blv/statistics.hpp"
#include "blv/synthesis.hpp"
