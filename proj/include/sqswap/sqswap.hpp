#pragma once

#include "sqswap/errors.hpp"
#include "sqswap/estimation.hpp"
#include "sqswap/evolution.hpp"
#include "sqswap/fock_basis.hpp"
#include "sqswap/gaussian.hpp"
#include "sqswap/operators.hpp"
#include "sqswap/optimizer.hpp"
#include "sqswap/protocol.hpp"
#include "sqswap/state.hpp"
#include "sqswap/types.hpp"
