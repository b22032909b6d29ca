#pragma once

#include "ckn/params.hpp"
#include "ckn/grid.hpp"
#include "ckn/field.hpp"
#include "ckn/bubbles.hpp"
#include "ckn/calculus.hpp"
#include "ckn/linops.hpp"
#include "ckn/decompose.hpp"
#include "ckn/stability.hpp"
#include "ckn/io.hpp"
