#pragma once
#include <kep/error.hpp>
#include <kep/penalties.hpp>
#include <kep/prox.hpp>
#include <kep/design.hpp>
#include <kep/solvers.hpp>
#include <kep/rng.hpp>
#include <kep/model_select.hpp>
#include <kep/experiments.hpp>
#include <kep/io.hpp>
