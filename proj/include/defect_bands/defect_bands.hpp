#pragma once

#include "defect_bands/bands.hpp"
#include "defect_bands/branches.hpp"
#include "defect_bands/chain.hpp"
#include "defect_bands/interval.hpp"
#include "defect_bands/linalg.hpp"
#include "defect_bands/model.hpp"
#include "defect_bands/oracle.hpp"
#include "defect_bands/parallel.hpp"
#include "defect_bands/quadrature.hpp"
#include "defect_bands/resolvent.hpp"
#include "defect_bands/symbol.hpp"
